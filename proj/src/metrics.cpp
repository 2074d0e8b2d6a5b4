#include "saxattn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "saxattn/error.hpp"

namespace saxattn {

double complexity_estimate(std::span<const double> x) {
  if (x.size() < 2) throw Error(ErrorCode::TooShort, "CE needs at least two points");
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) sum += (x[i] - x[i + 1]) * (x[i] - x[i + 1]);
  return std::sqrt(sum);
}

double svd_entropy(std::span<const double> x, std::size_t order, std::size_t delay) {
  if (order < 1 || delay < 1) throw Error(ErrorCode::BadParams, "order and delay must be positive");
  const auto span_len = (order - 1) * delay;
  if (x.size() < span_len + 2) throw Error(ErrorCode::TooShort, "series too short for the embedding");
  const auto rows = x.size() - span_len;
  Eigen::MatrixXd embedding(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(order));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < order; ++k) {
      embedding(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = x[i + k * delay];
    }
  }
  const Eigen::VectorXd singular = Eigen::JacobiSVD<Eigen::MatrixXd>(embedding).singularValues();
  if (singular.size() == 0 || singular.maxCoeff() <= 0.0) return 0.0;
  // Values below the numerical rank cut-off are zero singular values.
  const double cutoff = singular.maxCoeff() * static_cast<double>(std::max(rows, order)) *
                        std::numeric_limits<double>::epsilon();
  double total = 0.0;
  for (double s : singular) {
    if (s > cutoff) total += s;
  }
  double entropy = 0.0;
  for (double s : singular) {
    if (s <= cutoff) continue;
    const double p = s / total;
    entropy -= p * std::log(p);
  }
  return entropy == 0.0 ? 0.0 : entropy;
}

double default_entropy_tolerance(std::span<const double> x) {
  if (x.empty()) return 0.2;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double sq = 0.0;
  for (double v : x) sq += (v - mean) * (v - mean);
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  // Rounding in the mean can leave a tiny non-zero std for constant input.
  const double sd = *lo == *hi ? 0.0 : std::sqrt(sq / static_cast<double>(x.size()));
  return 0.2 * (sd == 0.0 ? 1.0 : sd);
}

namespace {

bool templates_match(std::span<const double> x, std::size_t a, std::size_t b, std::size_t len, double r) {
  for (std::size_t k = 0; k < len; ++k) {
    if (!(std::abs(x[a + k] - x[b + k]) < r)) return false;
  }
  return true;
}

double phi(std::span<const double> x, std::size_t m, double r) {
  const auto count = x.size() - m + 1;
  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t matches = 0;
    for (std::size_t j = 0; j < count; ++j) {
      if (templates_match(x, i, j, m, r)) ++matches;
    }
    sum += std::log(static_cast<double>(matches) / static_cast<double>(count));
  }
  return sum / static_cast<double>(count);
}

double resolve_tolerance(std::span<const double> x, std::optional<double> tolerance) {
  const double r = tolerance ? *tolerance : default_entropy_tolerance(x);
  if (!(r > 0.0)) throw Error(ErrorCode::BadParams, "tolerance r must be positive");
  return r;
}

}  // namespace

double approximate_entropy(std::span<const double> x, std::size_t order, std::optional<double> tolerance) {
  if (order < 1) throw Error(ErrorCode::BadParams, "order must be positive");
  if (x.size() <= order + 1) throw Error(ErrorCode::TooShort, "ApEn needs more than order + 1 points");
  const double r = resolve_tolerance(x, tolerance);
  return phi(x, order, r) - phi(x, order + 1, r);
}

std::optional<double> try_sample_entropy(std::span<const double> x, std::size_t order,
                                         std::optional<double> tolerance) {
  if (order < 1) throw Error(ErrorCode::BadParams, "order must be positive");
  if (x.size() <= order + 1) throw Error(ErrorCode::TooShort, "SampEn needs more than order + 1 points");
  const double r = resolve_tolerance(x, tolerance);
  const auto templates = x.size() - order;
  std::size_t shorter = 0;
  std::size_t longer = 0;
  for (std::size_t i = 0; i < templates; ++i) {
    for (std::size_t j = i + 1; j < templates; ++j) {
      if (!templates_match(x, i, j, order, r)) continue;
      ++shorter;
      if (std::abs(x[i + order] - x[j + order]) < r) ++longer;
    }
  }
  if (shorter == 0 || longer == 0) return std::nullopt;
  return -std::log(static_cast<double>(longer) / static_cast<double>(shorter));
}

double sample_entropy(std::span<const double> x, std::size_t order, std::optional<double> tolerance) {
  auto v = try_sample_entropy(x, order, tolerance);
  if (!v) throw Error(ErrorCode::UndefinedSampEn, "no matching templates");
  return *v;
}

std::size_t trend_shifts(std::span<const double> x, double r) {
  if (x.size() < 3) throw Error(ErrorCode::TooShort, "trend shifts need at least three points");
  std::size_t shifts = 0;
  for (std::size_t i = 2; i < x.size(); ++i) {
    const double slope = x[i] - x[i - 1];
    const double previous = x[i - 1] - x[i - 2];
    if (std::abs(slope - previous) >= r) ++shifts;
  }
  return shifts;
}

ComplexityReport complexity_report(std::span<const double> x, double data_reduction) {
  ComplexityReport r;
  r.data_reduction = data_reduction;
  auto attempt = [](auto&& f) -> decltype(std::optional(f())) {
    try {
      return f();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::TooShort || e.code() == ErrorCode::UndefinedSampEn) return std::nullopt;
      throw;
    }
  };
  r.ce = attempt([&] { return complexity_estimate(x); });
  r.svden = attempt([&] { return svd_entropy(x); });
  r.apen = attempt([&] { return approximate_entropy(x); });
  r.sampen = attempt([&] { return sample_entropy(x); });
  r.trend_shifts = attempt([&] { return trend_shifts(x); });
  return r;
}

nlohmann::json to_json(const ComplexityReport& r) {
  auto opt = [](const auto& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"ce", opt(r.ce)},         {"svden", opt(r.svden)},
          {"apen", opt(r.apen)},     {"sampen", opt(r.sampen)},
          {"trend_shifts", opt(r.trend_shifts)}, {"data_reduction", r.data_reduction}};
}

double model_fidelity(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "prediction lists differ in length");
  if (a.empty()) throw Error(ErrorCode::Empty, "no predictions");
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) agree += a[i] == b[i] ? 1 : 0;
  return static_cast<double>(agree) / static_cast<double>(a.size());
}

double matrix_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(ErrorCode::DimensionMismatch, "matrix shapes differ");
  double sum = 0.0;
  for (std::size_t k = 0; k < a.values().size(); ++k) {
    const double d = a.values()[k] - b.values()[k];
    sum += d * d;
  }
  return std::sqrt(sum);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(sq / static_cast<double>(values.size()));
  return out;
}

ConsistencyReport consistency(std::span<const std::vector<FoldSample>> folds, std::size_t samples_per_class) {
  if (folds.size() < 2) throw Error(ErrorCode::InsufficientSamples, "consistency needs at least two folds");
  if (samples_per_class == 0) throw Error(ErrorCode::BadParams, "samples_per_class must be positive");

  std::vector<std::unordered_map<std::string, std::size_t>> index(folds.size());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    for (std::size_t k = 0; k < folds[f].size(); ++k) index[f].emplace(folds[f][k].sample_id, k);
  }

  // (sample id, label) picked from fold 0 in order of appearance.
  std::vector<std::pair<std::string, int>> picked;
  std::unordered_map<int, std::size_t> per_class;
  for (const auto& s : folds.front()) {
    if (per_class[s.label] >= samples_per_class) continue;
    bool everywhere = true;
    for (std::size_t f = 1; f < folds.size(); ++f) everywhere = everywhere && index[f].contains(s.sample_id);
    if (!everywhere) continue;
    picked.emplace_back(s.sample_id, s.label);
    ++per_class[s.label];
  }
  std::size_t classes = 0;
  for (const auto& [label, count] : per_class) classes += count > 0 ? 1 : 0;
  if (classes < 2) throw Error(ErrorCode::InsufficientSamples, "consistency needs samples of at least two classes");

  auto lama = [&](std::size_t f, const std::string& id) -> const Matrix& { return folds[f][index[f].at(id)].lama; };

  std::vector<double> outer, inner_fold, inner_class;
  for (const auto& [id, label] : picked) {
    for (std::size_t f = 0; f < folds.size(); ++f) {
      double sum = 0.0;
      for (std::size_t g = 0; g < folds.size(); ++g) {
        if (g != f) sum += matrix_distance(lama(f, id), lama(g, id));
      }
      outer.push_back(sum / static_cast<double>(folds.size() - 1));

      double other_sum = 0.0, same_sum = 0.0;
      std::size_t other_n = 0, same_n = 0;
      for (const auto& [id2, label2] : picked) {
        if (id2 == id) continue;
        const double d = matrix_distance(lama(f, id), lama(f, id2));
        if (label2 == label) {
          same_sum += d;
          ++same_n;
        } else {
          other_sum += d;
          ++other_n;
        }
      }
      if (other_n > 0) inner_fold.push_back(other_sum / static_cast<double>(other_n));
      if (same_n > 0) inner_class.push_back(same_sum / static_cast<double>(same_n));
    }
  }
  if (inner_class.empty()) {
    throw Error(ErrorCode::InsufficientSamples, "no class has two sampled members for the inner class distance");
  }
  return {mean_std(outer), mean_std(inner_fold), mean_std(inner_class)};
}

nlohmann::json to_json(const ConsistencyReport& r) {
  auto ms = [](const MeanStd& m) { return nlohmann::json{{"mean", m.mean}, {"std", m.std}}; };
  return {{"outer_distance", ms(r.outer_distance)},
          {"inner_fold_distance", ms(r.inner_fold_distance)},
          {"inner_class_distance", ms(r.inner_class_distance)}};
}

}  // namespace saxattn
