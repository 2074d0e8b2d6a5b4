#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "saxattn/attention.hpp"
#include "saxattn/dataset.hpp"
#include "saxattn/gcr.hpp"
#include "saxattn/lasa.hpp"
#include "saxattn/symbolization.hpp"

namespace saxattn {

inline constexpr int kConfigVersion = 1;

struct FixtureSpec {
  std::string kind;
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t seed = 0;
};

/// Dataset files (train and test required, validation optional) or a fixture.
struct DatasetSource {
  std::optional<std::filesystem::path> train;
  std::optional<std::filesystem::path> validation;
  std::optional<std::filesystem::path> test;
  std::optional<FixtureSpec> fixture;
};

/// Fixed-weight forward pass used when no bundle is supplied.
struct GenerateSpec {
  std::size_t layers = 1;
  std::size_t heads = 1;
  std::size_t d_model = 4;
  std::size_t d_k = 2;
  /// "zero" (uniform attention) or "random".
  std::string weights = "zero";
  double scale = 1.0;
  bool use_pe = false;
  std::uint64_t seed = 0;
};

/// Exactly one of: per-split bundles, one bundle over all rows (train,
/// validation, test order), or generated attention.
struct AttentionSource {
  std::map<Split, std::filesystem::path> bundles;
  std::optional<std::filesystem::path> bundle;
  std::optional<GenerateSpec> generate;
};

struct ExperimentConfig {
  DatasetSource dataset;
  AttentionSource attention;
  int symbol_count = 3;
  /// LAVA combos (with a third step) for the abstraction grid.
  std::vector<ComboTag> lasa_combos;
  std::vector<ThresholdSpec> thresholds;
  /// LAMA combos the coherence models are built from.
  std::vector<ComboTag> gcr_combos;
  std::vector<GcrVariant> variants;
  bool export_heatmaps = true;
  /// Percentages of most certain test predictions to score; 100 is always included.
  std::vector<double> certainty_steps{80, 50, 20, 10};
  std::optional<std::filesystem::path> predictions;
  std::optional<std::filesystem::path> baseline_predictions;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;

  /// Normalized form with every default spelled out.
  nlohmann::json to_json() const;
  /// Throws BadConfig when a referenced file is missing.
  void check_files() const;
};

/// The eight "hl" LAVA combos.
std::vector<ComboTag> default_lasa_combos();
/// The four "hl" LAMA combos.
std::vector<ComboTag> default_gcr_combos();

/// Relative paths are resolved against `base_dir`. Missing keys take the
/// defaults above; unknown keys are rejected.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Everything downstream stages need, row-aligned with `dataset`.
struct Workspace {
  RawDataset dataset;
  std::vector<std::string> sample_ids;
  SaxCodec codec;
  std::vector<SymbolizedSeries> symbolized;
  std::vector<AttentionStack> stacks;

  std::optional<std::size_t> find(std::string_view sample_id) const;
};

RawDataset load_dataset_source(const DatasetSource& source);
/// Fits the codec on the train rows and symbolizes every row.
void symbolize(Workspace& ws, int symbol_count);
/// Fills stacks and sample ids; bundle rows must line up with the dataset.
void load_attention(Workspace& ws, const AttentionSource& source);
Workspace open_workspace(const ExperimentConfig& config);

}  // namespace saxattn
