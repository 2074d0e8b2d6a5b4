#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "saxattn/matrix.hpp"

namespace saxattn {

inline constexpr std::size_t kEntropyOrder = 2;
inline constexpr std::size_t kSvdOrder = 3;
inline constexpr std::size_t kSvdDelay = 1;
inline constexpr double kTrendShiftTolerance = 0.001;

/// Complexity estimate: length of the line through consecutive points,
/// sqrt(sum (q_i - q_{i+1})^2). Expects z-normalized input.
double complexity_estimate(std::span<const double> x);

/// Shannon entropy (natural log) of the normalized singular values of the
/// delay embedding with `order` columns.
double svd_entropy(std::span<const double> x, std::size_t order = kSvdOrder, std::size_t delay = kSvdDelay);

/// 0.2 * population std of x; a constant series falls back to 0.2.
double default_entropy_tolerance(std::span<const double> x);

/// phi^m(r) - phi^{m+1}(r), Chebyshev distance, strict "< r", self-matches counted.
double approximate_entropy(std::span<const double> x, std::size_t order = kEntropyOrder,
                           std::optional<double> tolerance = std::nullopt);

/// -ln(A/B) without self-matches. Throws UndefinedSampEn when A or B is zero.
double sample_entropy(std::span<const double> x, std::size_t order = kEntropyOrder,
                      std::optional<double> tolerance = std::nullopt);
std::optional<double> try_sample_entropy(std::span<const double> x, std::size_t order = kEntropyOrder,
                                         std::optional<double> tolerance = std::nullopt);

/// Number of positions where the unit-step slope changes by at least r.
std::size_t trend_shifts(std::span<const double> x, double r = kTrendShiftTolerance);

struct ComplexityReport {
  std::optional<double> ce;
  std::optional<double> svden;
  std::optional<double> apen;
  std::optional<double> sampen;
  std::optional<std::size_t> trend_shifts;
  double data_reduction = 0.0;
};

/// Each measure is left empty when the series is too short for it (or
/// SampEn is undefined).
ComplexityReport complexity_report(std::span<const double> x, double data_reduction);
nlohmann::json to_json(const ComplexityReport& r);

/// Fraction of positions where both predictors agree.
double model_fidelity(std::span<const int> a, std::span<const int> b);

/// Frobenius distance between equal-shape matrices.
double matrix_distance(const Matrix& a, const Matrix& b);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

struct ConsistencyReport {
  MeanStd outer_distance;
  MeanStd inner_fold_distance;
  MeanStd inner_class_distance;
};

struct FoldSample {
  std::string sample_id;
  int label = 0;
  Matrix lama;
};

/// LAMA distances across models (folds) and within one model. The first
/// `samples_per_class` ids of each class in fold 0 that exist in every fold
/// are used.
ConsistencyReport consistency(std::span<const std::vector<FoldSample>> folds, std::size_t samples_per_class = 3);
nlohmann::json to_json(const ConsistencyReport& r);

MeanStd mean_std(std::span<const double> values);

}  // namespace saxattn
