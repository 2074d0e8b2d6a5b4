#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "saxattn/attention.hpp"
#include "saxattn/symbolization.hpp"

namespace saxattn {

enum class ThresholdMode { Average, Maximum };

/// Threshold recipe: the LAVA mean (or max) divided by s1 gives t1, by s2
/// gives t2. A non-positive s2 disables dropping (t2 = -inf).
struct ThresholdSpec {
  ThresholdMode mode = ThresholdMode::Average;
  double s1 = 1.0;
  double s2 = 1.2;

  /// "avg[1,1.2]" style label.
  std::string str() const;
  /// Inverse of str(); also accepts "average"/"maximum" as the mode.
  static ThresholdSpec parse(std::string_view text);
  bool operator==(const ThresholdSpec&) const = default;
};

/// The four threshold settings of the reference grid.
std::vector<ThresholdSpec> default_threshold_grid();

struct Thresholds {
  double high = 0.0;  // t1
  double low = 0.0;   // t2
};

enum class Provenance { High, MediumCenter, MediumAbsorbed, Dropped };
std::string_view to_string(Provenance p);

struct KeptPoint {
  std::size_t position = 0;
  double value = 0.0;
  bool operator==(const KeptPoint&) const = default;
};

struct Abstraction {
  std::vector<KeptPoint> kept;
  std::vector<Provenance> provenance;
  /// Fraction of positions removed: (n - kept) / n.
  double reduction = 0.0;
  Thresholds thresholds;
  std::string sample_id;
  std::string combo;
};

/// Linearly interpolated series; positions outside the first/last kept point are masked.
struct ValidationSeries {
  std::vector<double> values;
  std::vector<bool> mask;
};

struct ReductionStats {
  double mean = 0.0;
  double std = 0.0;
};

Thresholds resolve_thresholds(std::span<const double> lava, const ThresholdSpec& spec);

/// Keeps a > t1 as is, collapses each maximal run of t2 < a <= t1 to its
/// centre position with the run's (lower) median value, drops a <= t2.
Abstraction abstract_series(const SymbolizedSeries& x, std::span<const double> lava, Thresholds t);
Abstraction abstract_series(const SymbolizedSeries& x, const Lava& lava, Thresholds t);

ValidationSeries interpolate(const Abstraction& a, std::size_t n);

ReductionStats reduction_stats(std::span<const Abstraction> batch);

/// One JSON-lines record (t2 = -inf is written as null).
nlohmann::json abstraction_record(const Abstraction& a);
std::string validation_csv(const ValidationSeries& v);

void to_json(nlohmann::json& j, const ThresholdSpec& spec);
void from_json(const nlohmann::json& j, ThresholdSpec& spec);

}  // namespace saxattn
