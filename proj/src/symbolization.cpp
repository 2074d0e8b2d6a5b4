#include "saxattn/symbolization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "saxattn/error.hpp"

namespace saxattn {

std::vector<double> mapped_symbol_values(int symbol_count) {
  if (symbol_count < 2) throw Error(ErrorCode::BadSymbolCount, "need at least two symbols");
  std::vector<double> values(static_cast<std::size_t>(symbol_count));
  const double step = 2.0 / (symbol_count - 1);
  for (int k = 0; k < symbol_count; ++k) values[k] = -1.0 + step * k;
  values.front() = -1.0;
  values.back() = 1.0;
  return values;
}

SaxCodec fit_codec(std::span<const std::vector<double>> train_series, int symbol_count) {
  if (symbol_count < 2) throw Error(ErrorCode::BadSymbolCount, "need at least two symbols");
  if (train_series.empty()) throw Error(ErrorCode::EmptyTrainSet, "no train series");

  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& s : train_series) {
    for (double v : s) {
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "train value is not finite");
      sum += v;
      ++count;
    }
  }
  if (count == 0) throw Error(ErrorCode::EmptyTrainSet, "train series are empty");

  SaxCodec codec;
  codec.symbol_count = symbol_count;
  codec.mean = sum / static_cast<double>(count);
  double sq = 0.0;
  for (const auto& s : train_series) {
    for (double v : s) sq += (v - codec.mean) * (v - codec.mean);
  }
  codec.std = std::sqrt(sq / static_cast<double>(count));
  bool constant = true;
  const double* first = nullptr;
  for (const auto& s : train_series) {
    for (const double& v : s) {
      if (!first) first = &v;
      constant = constant && v == *first;
    }
  }
  if (constant || codec.std == 0.0) codec.std = 1.0;

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : train_series) {
    for (double v : s) {
      const double z = codec.standardize(v);
      lo = std::min(lo, z);
      hi = std::max(hi, z);
    }
  }
  if (!(hi > lo)) {
    // Constant train data: widen to a unit band so the single value sits mid-range.
    lo -= 1.0;
    hi += 1.0;
  }
  codec.range_min = lo;
  codec.range_max = hi;

  const double width = (hi - lo) / symbol_count;
  codec.breakpoints.resize(static_cast<std::size_t>(symbol_count - 1));
  for (int k = 1; k < symbol_count; ++k) codec.breakpoints[k - 1] = lo + width * k;
  codec.mapped_values = mapped_symbol_values(symbol_count);
  return codec;
}

int SaxCodec::symbol_of(double x) const {
  const double z = standardize(x);
  auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), z);
  return static_cast<int>(it - breakpoints.begin());
}

double SaxCodec::bin_center(int symbol) const {
  const double width = (range_max - range_min) / symbol_count;
  return range_min + width * (symbol + 0.5);
}

SymbolizedSeries transform(const SaxCodec& codec, std::span<const double> series, int label) {
  if (codec.symbol_count < 2 || codec.mapped_values.size() != static_cast<std::size_t>(codec.symbol_count)) {
    throw Error(ErrorCode::BadSymbolCount, "codec is not fitted");
  }
  SymbolizedSeries out;
  out.label = label;
  out.symbols.reserve(series.size());
  out.values.reserve(series.size());
  for (double x : series) {
    if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteValue, "series value is not finite");
    const int s = codec.symbol_of(x);
    out.symbols.push_back(s);
    out.values.push_back(codec.mapped_values[static_cast<std::size_t>(s)]);
  }
  return out;
}

std::vector<SymbolizedSeries> transform_all(const SaxCodec& codec,
                                            std::span<const std::vector<double>> series,
                                            std::span<const int> labels) {
  if (series.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "series/labels count");
  std::vector<SymbolizedSeries> out;
  out.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) out.push_back(transform(codec, series[i], labels[i]));
  return out;
}

void to_json(nlohmann::json& j, const SaxCodec& codec) {
  j = nlohmann::json{{"symbol_count", codec.symbol_count},
                     {"mean", codec.mean},
                     {"std", codec.std},
                     {"range_min", codec.range_min},
                     {"range_max", codec.range_max},
                     {"breakpoints", codec.breakpoints},
                     {"mapped_values", codec.mapped_values}};
}

void from_json(const nlohmann::json& j, SaxCodec& codec) {
  try {
    codec.symbol_count = j.at("symbol_count").get<int>();
    codec.mean = j.at("mean").get<double>();
    codec.std = j.at("std").get<double>();
    codec.breakpoints = j.at("breakpoints").get<std::vector<double>>();
    codec.mapped_values = j.at("mapped_values").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadConfig, std::string("codec json: ") + e.what());
  }
  if (codec.symbol_count < 2 || codec.breakpoints.size() + 1 != static_cast<std::size_t>(codec.symbol_count) ||
      codec.mapped_values.size() != static_cast<std::size_t>(codec.symbol_count)) {
    throw Error(ErrorCode::BadSymbolCount, "codec json is inconsistent");
  }
  if (j.contains("range_min") && j.contains("range_max")) {
    codec.range_min = j.at("range_min").get<double>();
    codec.range_max = j.at("range_max").get<double>();
  } else {
    // No stored range: recover it from the equal-width breakpoints.
    const double width = codec.breakpoints.size() >= 2
                             ? (codec.breakpoints.back() - codec.breakpoints.front()) /
                                   static_cast<double>(codec.breakpoints.size() - 1)
                             : 1.0;
    codec.range_min = codec.breakpoints.front() - width;
    codec.range_max = codec.breakpoints.back() + width;
  }
}

}  // namespace saxattn
