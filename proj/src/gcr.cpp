#include "saxattn/gcr.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "saxattn/error.hpp"

namespace saxattn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string format_factor(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : (v[m - 1] + v[m]) / 2.0;
}

}  // namespace

std::string_view to_string(GcrShape s) {
  switch (s) {
    case GcrShape::Fcam: return "fcam";
    case GcrShape::Ccam: return "ccam";
    case GcrShape::Gtm: return "gtm";
  }
  return "unknown";
}

std::string_view to_string(PenaltyMode p) {
  switch (p) {
    case PenaltyMode::None: return "none";
    case PenaltyMode::Counting: return "counting";
    case PenaltyMode::Entropy: return "entropy";
  }
  return "unknown";
}

std::string GcrVariant::str() const {
  std::string out(to_string(shape));
  if (shape == GcrShape::Gtm) {
    out += gva == VectorAggregation::Max ? "_max" : gva == VectorAggregation::Median ? "_median" : "_avg";
  }
  out += gsa == SymbolAggregation::Sum ? "-sum" : "-ravg";
  if (penalty != PenaltyMode::None) {
    out += "-";
    out += to_string(penalty);
  }
  if (threshold_factor) out += "-t" + format_factor(*threshold_factor);
  return out;
}

GcrVariant GcrVariant::parse(std::string_view text) {
  const std::string original(text);
  std::vector<std::string_view> tokens;
  while (!text.empty()) {
    auto d = text.find('-');
    tokens.push_back(text.substr(0, d));
    text = d == std::string_view::npos ? std::string_view{} : text.substr(d + 1);
  }
  if (tokens.size() < 2) throw Error(ErrorCode::BadVariant, "variant needs shape and gsa: '" + original + "'");
  GcrVariant v;
  const auto shape = tokens[0];
  if (shape == "fcam") {
    v.shape = GcrShape::Fcam;
  } else if (shape == "ccam") {
    v.shape = GcrShape::Ccam;
  } else if (shape == "gtm_max") {
    v.shape = GcrShape::Gtm;
    v.gva = VectorAggregation::Max;
  } else if (shape == "gtm_median") {
    v.shape = GcrShape::Gtm;
    v.gva = VectorAggregation::Median;
  } else if (shape == "gtm_avg" || shape == "gtm") {
    v.shape = GcrShape::Gtm;
    v.gva = VectorAggregation::Average;
  } else {
    throw Error(ErrorCode::BadVariant, "unknown shape in '" + original + "'");
  }
  if (tokens[1] == "sum") {
    v.gsa = SymbolAggregation::Sum;
  } else if (tokens[1] == "ravg") {
    v.gsa = SymbolAggregation::RelativeAverage;
  } else {
    throw Error(ErrorCode::BadVariant, "gsa must be 'sum' or 'ravg' in '" + original + "'");
  }
  for (std::size_t k = 2; k < tokens.size(); ++k) {
    const auto tok = tokens[k];
    if (tok == "counting") {
      v.penalty = PenaltyMode::Counting;
    } else if (tok == "entropy") {
      v.penalty = PenaltyMode::Entropy;
    } else if (tok.size() > 1 && tok[0] == 't') {
      double factor = 0.0;
      auto [ptr, ec] = std::from_chars(tok.data() + 1, tok.data() + tok.size(), factor);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw Error(ErrorCode::BadVariant, "bad threshold factor in '" + original + "'");
      }
      v.threshold_factor = factor;
    } else {
      throw Error(ErrorCode::BadVariant, "unknown token '" + std::string(tok) + "' in '" + original + "'");
    }
  }
  v.check();
  return v;
}

void GcrVariant::check() const {
  if (penalty != PenaltyMode::None && threshold_factor) {
    throw Error(ErrorCode::BadVariant, "penalty and threshold variants are exclusive");
  }
  if (threshold_factor && !(*threshold_factor >= 0.0 && std::isfinite(*threshold_factor))) {
    throw Error(ErrorCode::BadVariant, "threshold factor must be a finite non-negative number");
  }
  if (!std::isfinite(alpha) || entropy_epsilon < 0.0) throw Error(ErrorCode::BadVariant, "bad alpha/epsilon");
}

std::vector<GcrVariant> default_variant_grid() {
  std::vector<GcrVariant> base;
  for (auto gsa : {SymbolAggregation::Sum, SymbolAggregation::RelativeAverage}) {
    base.push_back({.shape = GcrShape::Fcam, .gva = VectorAggregation::Average, .gsa = gsa, .threshold_factor = {}});
    for (auto gva : {VectorAggregation::Max, VectorAggregation::Median, VectorAggregation::Average}) {
      base.push_back({.shape = GcrShape::Gtm, .gva = gva, .gsa = gsa, .threshold_factor = {}});
    }
  }
  std::vector<GcrVariant> out = base;
  for (double factor : {1.0, 1.3, 1.6}) {
    for (auto v : base) {
      v.threshold_factor = factor;
      out.push_back(v);
    }
  }
  for (auto mode : {PenaltyMode::Counting, PenaltyMode::Entropy}) {
    for (auto v : base) {
      v.penalty = mode;
      out.push_back(v);
    }
  }
  return out;
}

GcrModel::GcrModel(GcrVariant variant, int symbol_count, std::size_t n, std::vector<int> classes)
    : variant_(variant), symbol_count_(symbol_count), n_(n), classes_(std::move(classes)) {
  variant_.check();
  if (symbol_count_ < 2) throw Error(ErrorCode::BadSymbolCount, "need at least two symbols");
  if (n_ == 0) throw Error(ErrorCode::DimensionMismatch, "sequence length must be positive");
  if (classes_.empty()) throw Error(ErrorCode::EmptyTrain, "no classes");
  if (!std::is_sorted(classes_.begin(), classes_.end()) ||
      std::adjacent_find(classes_.begin(), classes_.end()) != classes_.end()) {
    throw Error(ErrorCode::BadParams, "classes must be sorted and distinct");
  }
  const auto s = static_cast<std::size_t>(symbol_count_);
  fcam_.assign(classes_.size() * s * s * n_ * n_, 0.0);
  if (variant_.gsa == SymbolAggregation::RelativeAverage) counts_.assign(fcam_.size(), 0.0);
}

std::size_t GcrModel::class_index(int label) const {
  auto it = std::lower_bound(classes_.begin(), classes_.end(), label);
  if (it == classes_.end() || *it != label) {
    throw Error(ErrorCode::UnknownClass, "class " + std::to_string(label) + " is not part of the model");
  }
  return static_cast<std::size_t>(it - classes_.begin());
}

std::size_t GcrModel::fcam_index(std::size_t c, int u, int v, std::size_t i, std::size_t j) const {
  const auto s = static_cast<std::size_t>(symbol_count_);
  return (((c * s + static_cast<std::size_t>(u)) * s + static_cast<std::size_t>(v)) * n_ + i) * n_ + j;
}

void GcrModel::set_class_counts(std::vector<std::size_t> per_class) {
  if (per_class.size() != classes_.size()) throw Error(ErrorCode::BadParams, "one count per class expected");
  class_counts_ = std::move(per_class);
}

void GcrModel::check_input(const SymbolizedSeries& x) const {
  if (x.symbols.size() != n_) {
    throw Error(ErrorCode::LengthMismatch,
                "series length " + std::to_string(x.symbols.size()) + " != model length " + std::to_string(n_));
  }
  for (int s : x.symbols) {
    if (s < 0 || s >= symbol_count_) {
      throw Error(ErrorCode::VocabularyMismatch, "symbol " + std::to_string(s) + " outside the model vocabulary");
    }
  }
}

void GcrModel::route(std::size_t c, int u, int v, std::size_t i, std::size_t j, double amount) {
  const auto k = fcam_index(c, u, v, i, j);
  fcam_[k] += amount;
  if (!counts_.empty()) counts_[k] += 1.0;
}

void GcrModel::accumulate(const SymbolizedSeries& x, const Matrix& lama, int label) {
  if (finalized_) throw Error(ErrorCode::BadParams, "model is already finalized");
  if (fcam_.empty()) throw Error(ErrorCode::BadParams, "model has no full coherence store to accumulate into");
  if (variant_.penalty != PenaltyMode::None) {
    penalty_update(lama, x, label, variant_.penalty);
    return;
  }
  check_input(x);
  if (lama.rows() != n_ || lama.cols() != n_) throw Error(ErrorCode::DimensionMismatch, "LAMA is not n x n");
  const auto c = class_index(label);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) {
      const double a = lama(i, j);
      if (entry_threshold_ && a < *entry_threshold_) continue;
      route(c, x.symbols[i], x.symbols[j], i, j, a);
    }
  }
}

void GcrModel::penalty_update(const Matrix& lama, const SymbolizedSeries& x, int label, PenaltyMode mode) {
  if (finalized_) throw Error(ErrorCode::BadParams, "model is already finalized");
  check_input(x);
  if (lama.rows() != n_ || lama.cols() != n_) throw Error(ErrorCode::DimensionMismatch, "LAMA is not n x n");
  if (class_counts_.size() != classes_.size()) {
    throw Error(ErrorCode::BadParams, "class counts must be set before penalty accumulation");
  }
  const auto c = class_index(label);
  const double class_count = static_cast<double>(class_counts_[c]);
  if (class_count <= 0.0) throw Error(ErrorCode::BadParams, "class of a train sample has zero count");
  const double total = static_cast<double>(std::accumulate(class_counts_.begin(), class_counts_.end(), std::size_t{0}));
  const double classes = static_cast<double>(classes_.size());

  double entropy = 0.0;
  if (mode == PenaltyMode::Entropy) {
    const double e = class_count / total;
    entropy = std::max(-(e * std::log(e)), variant_.entropy_epsilon);
    if (entropy == 0.0) {
      throw Error(ErrorCode::EntropyDegenerate, "class frequency 1 gives zero entropy and no guard is set");
    }
  }

  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) {
      const double a = lama(i, j);
      double reward = 0.0;
      double sub = 0.0;
      if (mode == PenaltyMode::Counting) {
        sub = a / class_count;
        reward = variant_.alpha * (classes + 1.0) * sub;
      } else {
        reward = variant_.alpha * (classes + 1.0) * a / entropy;
        sub = a * entropy;
      }
      const int u = x.symbols[i];
      const int v = x.symbols[j];
      route(c, u, v, i, j, reward);
      for (std::size_t d = 0; d < classes_.size(); ++d) {
        if (d != c) route(d, u, v, i, j, -sub);
      }
    }
  }
}

void GcrModel::finalize() {
  if (finalized_) return;
  if (!counts_.empty()) {
    for (std::size_t k = 0; k < fcam_.size(); ++k) fcam_[k] = counts_[k] > 0.0 ? fcam_[k] / counts_[k] : 0.0;
  }
  derive();
  compute_max_scores();
  finalized_ = true;
}

void GcrModel::derive() {
  const auto s = static_cast<std::size_t>(symbol_count_);
  const auto nc = classes_.size();
  if (!fcam_.empty()) {
    ccam_.assign(nc * s * n_ * n_, 0.0);
    for (std::size_t c = 0; c < nc; ++c) {
      for (int u = 0; u < symbol_count_; ++u) {
        for (std::size_t v = 0; v < s; ++v) {
          for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) {
              ccam_[((c * s + v) * n_ + i) * n_ + j] += fcam_[fcam_index(c, u, static_cast<int>(v), i, j)];
            }
          }
        }
      }
    }
  }
  if (variant_.shape == GcrShape::Gtm && !ccam_.empty()) {
    gtm_.assign(nc * s * n_, 0.0);
    std::vector<double> column(n_);
    for (std::size_t c = 0; c < nc; ++c) {
      for (std::size_t v = 0; v < s; ++v) {
        for (std::size_t j = 0; j < n_; ++j) {
          for (std::size_t i = 0; i < n_; ++i) column[i] = ccam_[((c * s + v) * n_ + i) * n_ + j];
          double out = 0.0;
          switch (variant_.gva) {
            case VectorAggregation::Max: out = *std::max_element(column.begin(), column.end()); break;
            case VectorAggregation::Median: out = median_of(column); break;
            case VectorAggregation::Average: {
              double sum = 0.0;
              for (double a : column) sum += a;
              out = sum / static_cast<double>(n_);
              break;
            }
          }
          gtm_[(c * s + v) * n_ + j] = out;
        }
      }
    }
  }
}

void GcrModel::compute_max_scores() {
  const auto s = static_cast<std::size_t>(symbol_count_);
  max_scores_.assign(classes_.size(), 0.0);
  for (std::size_t c = 0; c < classes_.size(); ++c) {
    double total = 0.0;
    switch (variant_.shape) {
      case GcrShape::Fcam:
        for (std::size_t i = 0; i < n_; ++i) {
          for (std::size_t j = 0; j < n_; ++j) {
            double best = kNegInf;
            for (int u = 0; u < symbol_count_; ++u) {
              for (int v = 0; v < symbol_count_; ++v) best = std::max(best, fcam_[fcam_index(c, u, v, i, j)]);
            }
            total += best;
          }
        }
        break;
      case GcrShape::Ccam:
        // Column totals scaled by 1/n: the same normalizer the averaged trend vectors use.
        for (std::size_t j = 0; j < n_; ++j) {
          double best = kNegInf;
          for (std::size_t v = 0; v < s; ++v) {
            double column = 0.0;
            for (std::size_t i = 0; i < n_; ++i) column += ccam_[((c * s + v) * n_ + i) * n_ + j];
            best = std::max(best, column / static_cast<double>(n_));
          }
          total += best;
        }
        break;
      case GcrShape::Gtm:
        for (std::size_t j = 0; j < n_; ++j) {
          double best = kNegInf;
          for (std::size_t v = 0; v < s; ++v) best = std::max(best, gtm_[(c * s + v) * n_ + j]);
          total += best;
        }
        break;
    }
    max_scores_[c] = total;
  }
}

std::span<const double> GcrModel::max_scores() const {
  if (!finalized_) throw Error(ErrorCode::UnfinalizedModel, "max scores exist only after finalize");
  return max_scores_;
}

MembershipResult GcrModel::classify(const SymbolizedSeries& x) const {
  if (!finalized_) throw Error(ErrorCode::UnfinalizedModel, "classify needs a finalized model");
  check_input(x);
  const auto s = static_cast<std::size_t>(symbol_count_);
  MembershipResult r;
  r.scores.resize(classes_.size());
  for (std::size_t c = 0; c < classes_.size(); ++c) {
    double value = 0.0;
    switch (variant_.shape) {
      case GcrShape::Fcam:
        for (std::size_t i = 0; i < n_; ++i) {
          for (std::size_t j = 0; j < n_; ++j) value += fcam_[fcam_index(c, x.symbols[i], x.symbols[j], i, j)];
        }
        break;
      case GcrShape::Ccam:
        for (std::size_t j = 0; j < n_; ++j) {
          const auto v = static_cast<std::size_t>(x.symbols[j]);
          double column = 0.0;
          for (std::size_t i = 0; i < n_; ++i) column += ccam_[((c * s + v) * n_ + i) * n_ + j];
          value += column / static_cast<double>(n_);
        }
        break;
      case GcrShape::Gtm:
        for (std::size_t j = 0; j < n_; ++j) value += gtm_[(c * s + static_cast<std::size_t>(x.symbols[j])) * n_ + j];
        break;
    }
    r.scores[c] = max_scores_[c] > 0.0 ? value / max_scores_[c] : kNegInf;
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < r.scores.size(); ++c) {
    if (r.scores[c] > r.scores[best]) best = c;
  }
  r.predicted = classes_[best];
  r.certainty = r.scores[best];
  if (r.scores.size() > 1) {
    double second = kNegInf;
    for (std::size_t c = 0; c < r.scores.size(); ++c) {
      if (c != best) second = std::max(second, r.scores[c]);
    }
    if (std::isfinite(r.certainty) && std::isfinite(second)) r.margin = r.certainty - second;
  }
  return r;
}

double GcrModel::fcam(std::size_t c, int from, int to, std::size_t i, std::size_t j) const {
  if (fcam_.empty()) throw Error(ErrorCode::BadParams, "model carries no full coherence matrices");
  return fcam_[fcam_index(c, from, to, i, j)];
}

double GcrModel::count(std::size_t c, int from, int to, std::size_t i, std::size_t j) const {
  if (counts_.empty()) return 0.0;
  return counts_[fcam_index(c, from, to, i, j)];
}

double GcrModel::ccam(std::size_t c, int to, std::size_t i, std::size_t j) const {
  if (ccam_.empty()) throw Error(ErrorCode::UnfinalizedModel, "column-reduced matrices exist only after finalize");
  const auto s = static_cast<std::size_t>(symbol_count_);
  return ccam_[((c * s + static_cast<std::size_t>(to)) * n_ + i) * n_ + j];
}

double GcrModel::gtm(std::size_t c, int symbol, std::size_t j) const {
  if (gtm_.empty()) throw Error(ErrorCode::UnfinalizedModel, "trend vectors exist only for finalized GTM models");
  const auto s = static_cast<std::size_t>(symbol_count_);
  return gtm_[(c * s + static_cast<std::size_t>(symbol)) * n_ + j];
}

std::span<const double> GcrModel::shape_tensor() const {
  switch (variant_.shape) {
    case GcrShape::Fcam: return fcam_;
    case GcrShape::Ccam: return ccam_;
    case GcrShape::Gtm: return gtm_;
  }
  return {};
}

GcrModel GcrModel::from_shape_tensor(GcrVariant variant, int symbol_count, std::size_t n, std::vector<int> classes,
                                     std::vector<double> tensor) {
  GcrModel model(variant, symbol_count, n, std::move(classes));
  const auto s = static_cast<std::size_t>(symbol_count);
  const auto nc = model.classes_.size();
  std::size_t expected = 0;
  switch (variant.shape) {
    case GcrShape::Fcam: expected = nc * s * s * n * n; break;
    case GcrShape::Ccam: expected = nc * s * n * n; break;
    case GcrShape::Gtm: expected = nc * s * n; break;
  }
  if (tensor.size() != expected) throw Error(ErrorCode::DimensionMismatch, "stored tensor has the wrong size");
  model.counts_.clear();
  model.fcam_.clear();
  switch (variant.shape) {
    case GcrShape::Fcam:
      model.fcam_ = std::move(tensor);
      model.derive();
      break;
    case GcrShape::Ccam: model.ccam_ = std::move(tensor); break;
    case GcrShape::Gtm: model.gtm_ = std::move(tensor); break;
  }
  model.compute_max_scores();
  model.finalized_ = true;
  return model;
}

GcrModel build_gcr(std::span<const SymbolizedSeries> train, std::span<const Matrix> lamas, const GcrVariant& variant,
                   int symbol_count, std::optional<std::vector<int>> classes) {
  if (train.empty()) throw Error(ErrorCode::EmptyTrain, "no train samples");
  if (train.size() != lamas.size()) throw Error(ErrorCode::LengthMismatch, "one LAMA per train sample expected");
  if (!classes) {
    std::vector<int> labels;
    for (const auto& x : train) labels.push_back(x.label);
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    classes = std::move(labels);
  }
  GcrModel model(variant, symbol_count, train.front().size(), std::move(*classes));

  if (variant.penalty != PenaltyMode::None) {
    std::vector<std::size_t> per_class(model.classes().size(), 0);
    for (const auto& x : train) ++per_class[model.class_index(x.label)];
    model.set_class_counts(std::move(per_class));
  }
  if (variant.threshold_factor) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& m : lamas) {
      for (double a : m.values()) sum += a;
      count += m.values().size();
    }
    model.set_entry_threshold(*variant.threshold_factor * (count == 0 ? 0.0 : sum / static_cast<double>(count)));
  }
  for (std::size_t k = 0; k < train.size(); ++k) model.accumulate(train[k], lamas[k], train[k].label);
  model.finalize();
  return model;
}

double certainty_filter(std::span<const MembershipResult> results, std::span<const int> gold, double keep_fraction) {
  if (results.empty()) throw Error(ErrorCode::EmptyResults, "no classification results");
  if (gold.size() != results.size()) throw Error(ErrorCode::LengthMismatch, "one gold label per result expected");
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw Error(ErrorCode::BadFraction, "keep fraction must lie in (0, 1]");
  }
  std::vector<std::size_t> order(results.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return results[a].certainty > results[b].certainty; });
  const double raw = keep_fraction * static_cast<double>(results.size());
  auto keep = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  keep = std::clamp<std::size_t>(keep, 1, results.size());
  std::size_t correct = 0;
  for (std::size_t k = 0; k < keep; ++k) {
    if (results[order[k]].predicted == gold[order[k]]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(keep);
}

namespace {

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json heatmap_json(const GcrModel& model, int label, std::span<const double> symbol_values) {
  if (!model.finalized()) throw Error(ErrorCode::UnfinalizedModel, "heatmaps need a finalized model");
  const auto c = model.class_index(label);
  const auto n = model.length();
  const int s = model.symbol_count();
  std::vector<double> symbols(symbol_values.begin(), symbol_values.end());
  if (symbols.size() != static_cast<std::size_t>(s)) symbols = mapped_symbol_values(s);
  std::vector<std::size_t> positions(n);
  std::iota(positions.begin(), positions.end(), std::size_t{0});

  nlohmann::json doc{{"class", label},
                     {"variant", model.variant().str()},
                     {"combo", model.combo},
                     {"shape", to_string(model.variant().shape)},
                     {"n", n},
                     {"symbols", symbols},
                     {"origin", "bottom-left"},
                     {"max_score", finite_or_null(model.max_scores()[c])}};

  auto square = [&](auto&& cell) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row(n);
      for (std::size_t j = 0; j < n; ++j) row[j] = cell(i, j);
      rows.push_back(row);
    }
    return rows;
  };

  if (model.variant().shape == GcrShape::Gtm) {
    doc["row_axis"] = "symbol";
    doc["col_axis"] = "position";
    doc["row_labels"] = symbols;
    doc["col_labels"] = positions;
    nlohmann::json rows = nlohmann::json::array();
    for (int v = 0; v < s; ++v) {
      std::vector<double> row(n);
      for (std::size_t j = 0; j < n; ++j) row[j] = model.gtm(c, v, j);
      rows.push_back(row);
    }
    doc["matrix"] = rows;
    return doc;
  }

  doc["row_axis"] = "from position i";
  doc["col_axis"] = "to position j";
  doc["row_labels"] = positions;
  doc["col_labels"] = positions;
  nlohmann::json tiles = nlohmann::json::array();
  if (model.variant().shape == GcrShape::Fcam) {
    for (int u = 0; u < s; ++u) {
      for (int v = 0; v < s; ++v) {
        tiles.push_back({{"from", u},
                         {"to", v},
                         {"matrix", square([&](std::size_t i, std::size_t j) { return model.fcam(c, u, v, i, j); })}});
      }
    }
  } else {
    for (int v = 0; v < s; ++v) {
      tiles.push_back({{"to", v},
                       {"matrix", square([&](std::size_t i, std::size_t j) { return model.ccam(c, v, i, j); })}});
    }
  }
  doc["tiles"] = tiles;
  return doc;
}

nlohmann::json membership_json(const GcrModel& model, const MembershipResult& r) {
  nlohmann::json scores = nlohmann::json::object();
  for (std::size_t c = 0; c < model.classes().size(); ++c) {
    scores[std::to_string(model.classes()[c])] = finite_or_null(r.scores[c]);
  }
  return {{"scores", scores},
          {"predicted", r.predicted},
          {"certainty", finite_or_null(r.certainty)},
          {"margin", r.margin ? finite_or_null(*r.margin) : nlohmann::json(nullptr)}};
}

void write_gcr_store(const std::filesystem::path& manifest_path, const GcrModel& model,
                     std::span<const double> symbol_values) {
  if (!model.finalized()) throw Error(ErrorCode::UnfinalizedModel, "only finalized models can be stored");
  const auto payload_name = manifest_path.stem().string() + ".bin";
  const auto tensor = model.shape_tensor();
  {
    std::ofstream out(manifest_path.parent_path() / payload_name, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write GCR payload");
    std::string bytes;
    bytes.reserve(tensor.size() * 4);
    for (double v : tensor) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int shift = 0; shift < 32; shift += 8) bytes.push_back(static_cast<char>((bits >> shift) & 0xFFu));
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  std::vector<nlohmann::json> max_scores;
  for (double m : model.max_scores()) max_scores.push_back(finite_or_null(m));
  const auto s = static_cast<std::size_t>(model.symbol_count());
  const auto nc = model.classes().size();
  const auto n = model.length();
  std::vector<std::size_t> dims;
  switch (model.variant().shape) {
    case GcrShape::Fcam: dims = {nc, s, s, n, n}; break;
    case GcrShape::Ccam: dims = {nc, s, n, n}; break;
    case GcrShape::Gtm: dims = {nc, s, n}; break;
  }
  nlohmann::json manifest{{"format", "gcr-store"},
                          {"version", 1},
                          {"variant", model.variant().str()},
                          {"alpha", model.variant().alpha},
                          {"entropy_epsilon", model.variant().entropy_epsilon},
                          {"combo", model.combo},
                          {"symbol_count", model.symbol_count()},
                          {"vocabulary", std::vector<double>(symbol_values.begin(), symbol_values.end())},
                          {"n", n},
                          {"classes", model.classes()},
                          {"max_scores", max_scores},
                          {"dims", dims},
                          {"payload", payload_name}};
  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + manifest_path.string());
  out << manifest.dump(2) << '\n';
}

GcrModel read_gcr_store(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + manifest_path.string());
  nlohmann::json manifest;
  GcrVariant variant;
  int symbol_count = 0;
  std::size_t n = 0;
  std::vector<int> classes;
  std::string payload_name;
  try {
    manifest = nlohmann::json::parse(in);
    variant = GcrVariant::parse(manifest.at("variant").get<std::string>());
    variant.alpha = manifest.value("alpha", 1.0);
    variant.entropy_epsilon = manifest.value("entropy_epsilon", 1e-12);
    symbol_count = manifest.at("symbol_count").get<int>();
    n = manifest.at("n").get<std::size_t>();
    classes = manifest.at("classes").get<std::vector<int>>();
    payload_name = manifest.at("payload").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadConfig, std::string("GCR manifest: ") + e.what());
  }
  std::ifstream payload(manifest_path.parent_path() / payload_name, std::ios::binary);
  if (!payload) throw Error(ErrorCode::Io, "cannot open GCR payload " + payload_name);
  std::string bytes((std::istreambuf_iterator<char>(payload)), std::istreambuf_iterator<char>());
  if (bytes.size() % 4 != 0) throw Error(ErrorCode::BadBundle, "GCR payload is not a whole number of floats");
  std::vector<double> tensor(bytes.size() / 4);
  for (std::size_t k = 0; k < tensor.size(); ++k) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * k + b])) << (8 * b);
    tensor[k] = static_cast<double>(std::bit_cast<float>(bits));
  }
  auto model = GcrModel::from_shape_tensor(variant, symbol_count, n, std::move(classes), std::move(tensor));
  model.combo = manifest.value("combo", std::string{});
  return model;
}

}  // namespace saxattn
