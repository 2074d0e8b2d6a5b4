#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "saxattn/matrix.hpp"
#include "saxattn/symbolization.hpp"

namespace saxattn {

enum class GcrShape { Fcam, Ccam, Gtm };
/// How a column-reduced matrix collapses to a position vector.
enum class VectorAggregation { Max, Median, Average };
/// How routed LAMA entries are combined per cell.
enum class SymbolAggregation { Sum, RelativeAverage };
enum class PenaltyMode { None, Counting, Entropy };

/// One point of the GCR grid. Rendered as dash-joined tokens, e.g.
/// "fcam-sum", "gtm_avg-ravg-t1.3", "ccam-sum-counting".
struct GcrVariant {
  GcrShape shape = GcrShape::Fcam;
  VectorAggregation gva = VectorAggregation::Average;
  SymbolAggregation gsa = SymbolAggregation::Sum;
  PenaltyMode penalty = PenaltyMode::None;
  double alpha = 1.0;
  double entropy_epsilon = 1e-12;
  std::optional<double> threshold_factor;

  std::string str() const;
  static GcrVariant parse(std::string_view text);
  void check() const;
  bool operator==(const GcrVariant&) const = default;
};

/// FCAM and the three GTMs under both GSA modes, each plain, thresholded
/// (1.0, 1.3, 1.6) and with either penalty.
std::vector<GcrVariant> default_variant_grid();

struct MembershipResult {
  /// Aligned with GcrModel::classes().
  std::vector<double> scores;
  int predicted = 0;
  /// Largest membership score; -inf when no class is electable.
  double certainty = 0.0;
  /// Top-minus-runner-up score, when both are finite.
  std::optional<double> margin;
};

/// Per-class coherence store. The full (from, to) x (i, j) accumulation is the
/// source; column-reduced matrices and trend vectors are derived on finalize.
class GcrModel {
 public:
  GcrModel(GcrVariant variant, int symbol_count, std::size_t n, std::vector<int> classes);

  const GcrVariant& variant() const noexcept { return variant_; }
  int symbol_count() const noexcept { return symbol_count_; }
  std::size_t length() const noexcept { return n_; }
  const std::vector<int>& classes() const noexcept { return classes_; }
  bool finalized() const noexcept { return finalized_; }
  /// Index of `label` in classes(); throws UnknownClass.
  std::size_t class_index(int label) const;

  /// Train-set class frequencies, required before penalty accumulation.
  void set_class_counts(std::vector<std::size_t> per_class);
  /// Entries strictly below this value are skipped while routing.
  void set_entry_threshold(double threshold) { entry_threshold_ = threshold; }
  std::optional<double> entry_threshold() const noexcept { return entry_threshold_; }

  /// Routes one train sample according to the variant (plain, thresholded or penalty).
  void accumulate(const SymbolizedSeries& x, const Matrix& lama, int label);
  /// Reward class `label`, penalize every other class at the same routed cells.
  void penalty_update(const Matrix& lama, const SymbolizedSeries& x, int label, PenaltyMode mode);
  void finalize();

  MembershipResult classify(const SymbolizedSeries& x) const;
  std::span<const double> max_scores() const;

  bool has_fcam() const noexcept { return !fcam_.empty(); }
  bool has_ccam() const noexcept { return !ccam_.empty(); }
  bool has_gtm() const noexcept { return !gtm_.empty(); }
  double fcam(std::size_t c, int from, int to, std::size_t i, std::size_t j) const;
  double ccam(std::size_t c, int to, std::size_t i, std::size_t j) const;
  double gtm(std::size_t c, int symbol, std::size_t j) const;
  /// Cell counts of the relative-average mode (before division).
  double count(std::size_t c, int from, int to, std::size_t i, std::size_t j) const;

  /// Raw tensor of the model's own shape, row-major:
  /// fcam [c][u][v][i][j], ccam [c][v][i][j], gtm [c][v][j].
  std::span<const double> shape_tensor() const;
  /// Rebuilds a finalized model of `variant.shape` from a stored tensor.
  static GcrModel from_shape_tensor(GcrVariant variant, int symbol_count, std::size_t n, std::vector<int> classes,
                                    std::vector<double> tensor);

  /// Free-form provenance (LAMA combo) carried into exports.
  std::string combo;

  bool operator==(const GcrModel&) const = default;

 private:
  std::size_t fcam_index(std::size_t c, int u, int v, std::size_t i, std::size_t j) const;
  void route(std::size_t c, int u, int v, std::size_t i, std::size_t j, double amount);
  void derive();
  void compute_max_scores();
  void check_input(const SymbolizedSeries& x) const;

  GcrVariant variant_;
  int symbol_count_;
  std::size_t n_;
  std::vector<int> classes_;
  std::vector<std::size_t> class_counts_;
  std::optional<double> entry_threshold_;
  bool finalized_ = false;
  std::vector<double> fcam_;
  std::vector<double> counts_;
  std::vector<double> ccam_;
  std::vector<double> gtm_;
  std::vector<double> max_scores_;
};

/// Builds and finalizes a model from train samples and their LAMAs. Classes
/// default to the sorted distinct train labels.
GcrModel build_gcr(std::span<const SymbolizedSeries> train, std::span<const Matrix> lamas, const GcrVariant& variant,
                   int symbol_count, std::optional<std::vector<int>> classes = {});

/// Accuracy over the ceil(p * N) most certain results (stable on ties).
double certainty_filter(std::span<const MembershipResult> results, std::span<const int> gold, double keep_fraction);

/// Heatmap document for one class, row index 0 being the bottom row when drawn.
nlohmann::json heatmap_json(const GcrModel& model, int label, std::span<const double> symbol_values);

nlohmann::json membership_json(const GcrModel& model, const MembershipResult& r);

/// Manifest JSON plus a binary32 LE payload of the shape tensor.
void write_gcr_store(const std::filesystem::path& manifest_path, const GcrModel& model,
                     std::span<const double> symbol_values);
GcrModel read_gcr_store(const std::filesystem::path& manifest_path);

std::string_view to_string(GcrShape s);
std::string_view to_string(PenaltyMode p);

}  // namespace saxattn
