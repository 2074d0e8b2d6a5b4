#include "saxattn/attention.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "saxattn/error.hpp"

namespace saxattn {

AttentionStack::AttentionStack(std::size_t layers, std::size_t heads, std::size_t n, std::string sample_id)
    : layers_(layers), heads_(heads), n_(n), sample_id_(std::move(sample_id)),
      data_(layers * heads * n * n, 0.0) {}

Matrix AttentionStack::matrix(std::size_t l, std::size_t h) const {
  Matrix m(n_, n_);
  std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>((l * heads_ + h) * n_ * n_), n_ * n_,
              m.values().begin());
  return m;
}

void AttentionStack::set_matrix(std::size_t l, std::size_t h, const Matrix& m) {
  if (m.rows() != n_ || m.cols() != n_) throw Error(ErrorCode::DimensionMismatch, "matrix is not n x n");
  std::copy(m.values().begin(), m.values().end(),
            data_.begin() + static_cast<std::ptrdiff_t>((l * heads_ + h) * n_ * n_));
}

void validate_stack(const AttentionStack& stack, double tolerance) {
  const auto n = stack.length();
  for (std::size_t l = 0; l < stack.layers(); ++l) {
    for (std::size_t h = 0; h < stack.heads(); ++h) {
      for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double a = stack.at(l, h, i, j);
          if (!std::isfinite(a) || a < 0.0 || a > 1.0 + tolerance) {
            throw Error(ErrorCode::NonStochasticRows,
                        "sample '" + stack.sample_id() + "' layer " + std::to_string(l) + " head " +
                            std::to_string(h) + " row " + std::to_string(i) + ": entry out of [0,1]");
          }
          sum += a;
        }
        if (std::abs(sum - 1.0) > tolerance) {
          throw Error(ErrorCode::NonStochasticRows,
                      "sample '" + stack.sample_id() + "' layer " + std::to_string(l) + " head " +
                          std::to_string(h) + " row " + std::to_string(i) + " sums to " + std::to_string(sum));
        }
      }
    }
  }
}

std::string_view to_string(Reduce r) { return r == Reduce::Max ? "max" : "sum"; }

Reduce parse_reduce(std::string_view text) {
  if (text == "max" || text == "m") return Reduce::Max;
  if (text == "sum" || text == "s") return Reduce::Sum;
  throw Error(ErrorCode::BadCombo, "unknown reduction '" + std::string(text) + "'");
}

ComboTag ComboTag::parse(std::string_view text) {
  const std::string original(text);
  auto dash = text.find('-');
  if (dash == std::string_view::npos) throw Error(ErrorCode::BadCombo, "missing '-' in '" + original + "'");
  ComboTag tag;
  const auto order = text.substr(0, dash);
  if (order == "hl") {
    tag.order = AxisOrder::HeadsThenLayers;
  } else if (order == "lh") {
    tag.order = AxisOrder::LayersThenHeads;
  } else {
    throw Error(ErrorCode::BadCombo, "order must be 'hl' or 'lh' in '" + original + "'");
  }
  auto rest = text.substr(dash + 1);
  std::vector<Reduce> steps;
  if (std::ranges::find(rest, '-') != rest.end() || rest == "max" || rest == "sum") {
    std::string tok;
    for (std::size_t i = 0; i <= rest.size(); ++i) {
      if (i < rest.size() && rest[i] != '-') {
        tok += rest[i];
        continue;
      }
      if (tok != "max" && tok != "sum") throw Error(ErrorCode::BadCombo, "bad step in '" + original + "'");
      steps.push_back(parse_reduce(tok));
      tok.clear();
    }
  } else {
    for (char c : rest) {
      if (c != 'm' && c != 's') throw Error(ErrorCode::BadCombo, "bad step in '" + original + "'");
      steps.push_back(c == 'm' ? Reduce::Max : Reduce::Sum);
    }
  }
  if (steps.size() != 2 && steps.size() != 3) {
    throw Error(ErrorCode::BadCombo, "expected two or three steps in '" + original + "'");
  }
  tag.step1 = steps[0];
  tag.step2 = steps[1];
  if (steps.size() == 3) tag.step3 = steps[2];
  return tag;
}

std::string ComboTag::str() const {
  std::string out = order == AxisOrder::HeadsThenLayers ? "hl-" : "lh-";
  auto letter = [](Reduce r) { return r == Reduce::Max ? 'm' : 's'; };
  out += letter(step1);
  out += letter(step2);
  if (step3) out += letter(*step3);
  return out;
}

std::vector<ComboTag> all_matrix_combos() {
  std::vector<ComboTag> out;
  for (auto order : {AxisOrder::HeadsThenLayers, AxisOrder::LayersThenHeads}) {
    for (auto s1 : {Reduce::Max, Reduce::Sum}) {
      for (auto s2 : {Reduce::Max, Reduce::Sum}) out.push_back({order, s1, s2, std::nullopt});
    }
  }
  return out;
}

MhaWeights MhaWeights::zeros(std::size_t layers, std::size_t heads, std::size_t d_model, std::size_t d_k) {
  MhaWeights w;
  w.layers = layers;
  w.heads = heads;
  w.d_model = d_model;
  w.d_k = d_k;
  w.input_embedding.assign(d_model, 1.0);
  w.query.assign(layers * heads, Matrix(d_model, d_k));
  w.key.assign(layers * heads, Matrix(d_model, d_k));
  return w;
}

MhaWeights MhaWeights::random(std::size_t layers, std::size_t heads, std::size_t d_model, std::size_t d_k,
                              std::uint64_t seed, double scale) {
  auto w = zeros(layers, heads, d_model, d_k);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  for (auto& m : w.query) {
    for (auto& v : m.values()) v = normal(rng);
  }
  for (auto& m : w.key) {
    for (auto& v : m.values()) v = normal(rng);
  }
  return w;
}

void MhaWeights::check() const {
  if (layers == 0 || heads == 0 || d_model == 0 || d_k == 0) {
    throw Error(ErrorCode::DimensionMismatch, "weights need at least one layer, head and dimension");
  }
  if (input_embedding.size() != d_model || query.size() != layers * heads || key.size() != layers * heads) {
    throw Error(ErrorCode::DimensionMismatch, "weight tensor counts do not match layers x heads");
  }
  for (std::size_t k = 0; k < query.size(); ++k) {
    for (const auto* m : {&query[k], &key[k]}) {
      if (m->rows() != d_model || m->cols() != d_k) {
        throw Error(ErrorCode::DimensionMismatch, "projection is not d_model x d_k");
      }
      for (double v : m->values()) {
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "projection weight is not finite");
      }
    }
  }
}

Matrix positional_encoding(std::size_t n, std::size_t d_model) {
  if (d_model < 2 || d_model % 2 != 0) {
    throw Error(ErrorCode::OddDimension, "d_model must be even and >= 2, got " + std::to_string(d_model));
  }
  Matrix pe(n, d_model);
  for (std::size_t pos = 0; pos < n; ++pos) {
    for (std::size_t i = 0; 2 * i < d_model; ++i) {
      const double angle = static_cast<double>(pos) /
                           std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d_model));
      pe(pos, 2 * i) = std::sin(angle);
      pe(pos, 2 * i + 1) = std::cos(angle);
    }
  }
  return pe;
}

Matrix attention_matrix(const Matrix& queries, const Matrix& keys) {
  if (queries.cols() == 0 || queries.cols() != keys.cols() || queries.rows() != keys.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "Q and K must both be n x d_k with d_k >= 1");
  }
  for (const auto* m : {&queries, &keys}) {
    for (double v : m->values()) {
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "attention input is not finite");
    }
  }
  const auto n = queries.rows();
  const auto d_k = queries.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_k));
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d_k; ++k) dot += queries(i, k) * keys(j, k);
      row[j] = dot * scale;
    }
    const double peak = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (auto& v : row) {
      v = std::exp(v - peak);
      sum += v;
    }
    for (auto& v : row) v /= sum;
  }
  return out;
}

namespace {

Matrix multiply(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

void fold_into(Matrix& acc, const Matrix& m, Reduce how, bool first) {
  auto dst = acc.values();
  auto src = m.values();
  if (first) {
    std::copy(src.begin(), src.end(), dst.begin());
    return;
  }
  for (std::size_t k = 0; k < dst.size(); ++k) {
    dst[k] = how == Reduce::Max ? std::max(dst[k], src[k]) : dst[k] + src[k];
  }
}

}  // namespace

AttentionStack forward_attention(const SymbolizedSeries& x, const MhaWeights& weights, bool use_pe,
                                 std::string sample_id) {
  weights.check();
  const auto n = x.values.size();
  if (n == 0) throw Error(ErrorCode::DimensionMismatch, "empty input series");

  Matrix input(n, weights.d_model);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < weights.d_model; ++k) input(i, k) = x.values[i] * weights.input_embedding[k];
  }
  if (use_pe) {
    const auto pe = positional_encoding(n, weights.d_model);
    for (std::size_t k = 0; k < input.values().size(); ++k) input.values()[k] += pe.values()[k];
  }

  AttentionStack stack(weights.layers, weights.heads, n, std::move(sample_id));
  for (std::size_t l = 0; l < weights.layers; ++l) {
    Matrix next(n, weights.d_model);
    for (std::size_t h = 0; h < weights.heads; ++h) {
      const auto a = attention_matrix(multiply(input, weights.query_of(l, h)), multiply(input, weights.key_of(l, h)));
      stack.set_matrix(l, h, a);
      const auto mixed = multiply(a, input);
      for (std::size_t k = 0; k < next.values().size(); ++k) next.values()[k] += mixed.values()[k];
    }
    for (auto& v : next.values()) v /= static_cast<double>(weights.heads);
    input = std::move(next);
  }
  return stack;
}

Lama aggregate_lama(const AttentionStack& stack, const ComboTag& combo) {
  const auto n = stack.length();
  if (stack.layers() == 0 || stack.heads() == 0 || n == 0) {
    throw Error(ErrorCode::DimensionMismatch, "attention stack is empty");
  }
  const bool heads_first = combo.order == AxisOrder::HeadsThenLayers;
  const auto outer = heads_first ? stack.layers() : stack.heads();
  const auto inner = heads_first ? stack.heads() : stack.layers();

  Matrix result(n, n);
  if (combo.step1 == combo.step2) {
    // Both steps equal: the axis order cannot matter, so fold every matrix in
    // (layer, head) order to make "hl" and "lh" agree to the last bit.
    for (std::size_t l = 0; l < stack.layers(); ++l) {
      for (std::size_t h = 0; h < stack.heads(); ++h) fold_into(result, stack.matrix(l, h), combo.step1, l == 0 && h == 0);
    }
    return {std::move(result), combo.matrix_part(), stack.sample_id()};
  }
  Matrix partial(n, n);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t k = 0; k < inner; ++k) {
      const auto m = heads_first ? stack.matrix(o, k) : stack.matrix(k, o);
      fold_into(partial, m, combo.step1, k == 0);
    }
    fold_into(result, partial, combo.step2, o == 0);
  }
  return {std::move(result), combo.matrix_part(), stack.sample_id()};
}

Lava aggregate_lava(const Lama& lama, Reduce step3) {
  const auto n = lama.matrix.rows();
  if (lama.matrix.cols() != n) throw Error(ErrorCode::DimensionMismatch, "LAMA is not square");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = lama.matrix.row(i);
    if (step3 == Reduce::Max) {
      out[i] = *std::max_element(row.begin(), row.end());
    } else {
      double sum = 0.0;
      for (double v : row) sum += v;
      out[i] = sum;
    }
  }
  auto combo = lama.combo;
  combo.step3 = step3;
  return {std::move(out), combo, lama.sample_id};
}

Lava aggregate_lava(const AttentionStack& stack, const ComboTag& combo) {
  if (!combo.step3) throw Error(ErrorCode::BadCombo, "combo '" + combo.str() + "' has no third step");
  return aggregate_lava(aggregate_lama(stack, combo), *combo.step3);
}

}  // namespace saxattn
