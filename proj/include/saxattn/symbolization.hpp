#pragma once

#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace saxattn {

/// Standardize-then-discretize codec. Breakpoints split the standardized
/// train range into equal-width bins; each symbol maps to an evenly spaced
/// value in [-1, 1] (S=3 gives {-1, 0, 1}).
struct SaxCodec {
  int symbol_count = 0;
  double mean = 0.0;
  double std = 1.0;
  /// Standardized train range the bins were cut from.
  double range_min = 0.0;
  double range_max = 0.0;
  std::vector<double> breakpoints;
  std::vector<double> mapped_values;

  double standardize(double x) const { return (x - mean) / std; }
  /// Bin index of a raw value; values outside the fitted range clamp to the
  /// outermost bins, a value equal to a breakpoint goes to the upper bin.
  int symbol_of(double x) const;
  /// Centre of a symbol's bin in standardized space.
  double bin_center(int symbol) const;

  bool operator==(const SaxCodec&) const = default;
};

struct SymbolizedSeries {
  std::vector<int> symbols;
  std::vector<double> values;
  int label = 0;

  std::size_t size() const noexcept { return symbols.size(); }
};

SaxCodec fit_codec(std::span<const std::vector<double>> train_series, int symbol_count);

SymbolizedSeries transform(const SaxCodec& codec, std::span<const double> series, int label = 0);

std::vector<SymbolizedSeries> transform_all(const SaxCodec& codec,
                                            std::span<const std::vector<double>> series,
                                            std::span<const int> labels);

/// Evenly spaced symbol values over [-1, 1].
std::vector<double> mapped_symbol_values(int symbol_count);

void to_json(nlohmann::json& j, const SaxCodec& codec);
void from_json(const nlohmann::json& j, SaxCodec& codec);

}  // namespace saxattn
