#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "saxattn/matrix.hpp"
#include "saxattn/symbolization.hpp"

namespace saxattn {

/// Row-sum tolerance applied to externally produced (binary32) attention.
inline constexpr double kIngestRowSumTolerance = 1e-4;

/// All attention matrices of one sample, indexed (layer, head, row, col).
class AttentionStack {
 public:
  AttentionStack() = default;
  AttentionStack(std::size_t layers, std::size_t heads, std::size_t n, std::string sample_id = {});

  std::size_t layers() const noexcept { return layers_; }
  std::size_t heads() const noexcept { return heads_; }
  std::size_t length() const noexcept { return n_; }
  const std::string& sample_id() const noexcept { return sample_id_; }
  void set_sample_id(std::string id) { sample_id_ = std::move(id); }

  double& at(std::size_t l, std::size_t h, std::size_t i, std::size_t j) {
    return data_[((l * heads_ + h) * n_ + i) * n_ + j];
  }
  double at(std::size_t l, std::size_t h, std::size_t i, std::size_t j) const {
    return data_[((l * heads_ + h) * n_ + i) * n_ + j];
  }

  Matrix matrix(std::size_t l, std::size_t h) const;
  void set_matrix(std::size_t l, std::size_t h, const Matrix& m);

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }

  bool operator==(const AttentionStack&) const = default;

 private:
  std::size_t layers_ = 0;
  std::size_t heads_ = 0;
  std::size_t n_ = 0;
  std::string sample_id_;
  std::vector<double> data_;
};

/// Throws NonStochasticRows if an entry leaves [0, 1] or a row sum is off by
/// more than `tolerance`. Never renormalizes.
void validate_stack(const AttentionStack& stack, double tolerance = kIngestRowSumTolerance);

enum class Reduce { Max, Sum };
enum class AxisOrder {
  HeadsThenLayers,  // "hl"
  LayersThenHeads,  // "lh"
};

/// Aggregation recipe, rendered like "hl-ms" (matrix) or "hl-msm" (vector).
struct ComboTag {
  AxisOrder order = AxisOrder::HeadsThenLayers;
  Reduce step1 = Reduce::Max;
  Reduce step2 = Reduce::Sum;
  std::optional<Reduce> step3;

  /// Accepts "hl-ms", "hl-msm" and the long form "hl-max-sum[-max]".
  static ComboTag parse(std::string_view text);
  std::string str() const;
  ComboTag matrix_part() const { return {order, step1, step2, std::nullopt}; }

  bool operator==(const ComboTag&) const = default;
};

/// The eight matrix combos, "hl" first.
std::vector<ComboTag> all_matrix_combos();

struct Lama {
  Matrix matrix;
  ComboTag combo;
  std::string sample_id;
};

struct Lava {
  std::vector<double> values;
  ComboTag combo;
  std::string sample_id;
};

/// Projection weights of a stack of self-attention layers.
struct MhaWeights {
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::size_t d_model = 0;
  std::size_t d_k = 0;
  /// Scalar-to-d_model embedding of the mapped symbol value.
  std::vector<double> input_embedding;
  /// Indexed [layer * heads + head]; each d_model x d_k.
  std::vector<Matrix> query;
  std::vector<Matrix> key;

  const Matrix& query_of(std::size_t l, std::size_t h) const { return query[l * heads + h]; }
  const Matrix& key_of(std::size_t l, std::size_t h) const { return key[l * heads + h]; }

  static MhaWeights zeros(std::size_t layers, std::size_t heads, std::size_t d_model, std::size_t d_k);
  /// Entries drawn from N(0, scale^2); deterministic for a given seed.
  static MhaWeights random(std::size_t layers, std::size_t heads, std::size_t d_model, std::size_t d_k,
                           std::uint64_t seed, double scale = 1.0);

  void check() const;
};

/// Sinusoidal encoding; column 2i holds sin(pos / 10000^(2i/d)), 2i+1 the cosine.
Matrix positional_encoding(std::size_t n, std::size_t d_model);

/// softmax(Q K^T / sqrt(d_k)) row by row.
Matrix attention_matrix(const Matrix& queries, const Matrix& keys);

/// Attention-only encoder pass over a symbolized series. Layer l+1 consumes the
/// head-averaged attention-weighted input of layer l; no FFN or LayerNorm.
AttentionStack forward_attention(const SymbolizedSeries& x, const MhaWeights& weights, bool use_pe,
                                 std::string sample_id = {});

Lama aggregate_lama(const AttentionStack& stack, const ComboTag& combo);
Lava aggregate_lava(const Lama& lama, Reduce step3);
/// Both steps in one go; `combo.step3` must be set.
Lava aggregate_lava(const AttentionStack& stack, const ComboTag& combo);

std::string_view to_string(Reduce r);
Reduce parse_reduce(std::string_view text);

}  // namespace saxattn
