#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "saxattn/config.hpp"
#include "saxattn/error.hpp"
#include "saxattn/gcr.hpp"
#include "saxattn/lasa.hpp"
#include "saxattn/metrics.hpp"

namespace saxattn {

inline constexpr int kReportVersion = 1;

/// Key of a built model, "<variant>@<lama combo>".
std::string model_key(const GcrVariant& variant, const ComboTag& combo);
/// Filesystem-friendly form of a threshold spec, e.g. "avg_1_1.2".
std::string threshold_slug(const ThresholdSpec& spec);

std::vector<Matrix> compute_lamas(const Workspace& ws, const ComboTag& combo);

/// Trains on the train rows of the workspace.
GcrModel train_model(const Workspace& ws, std::span<const Matrix> lamas, const GcrVariant& variant,
                     const ComboTag& combo);

struct CurvePoint {
  double percent = 100.0;
  double accuracy = 0.0;
};
/// Accuracy of the most certain predictions at 100% and then each step.
std::vector<CurvePoint> certainty_curve(std::span<const MembershipResult> results, std::span<const int> gold,
                                        std::span<const double> steps_percent);
nlohmann::json to_json(std::span<const CurvePoint> curve);

/// Heatmap file contents; the service answers with the same bytes.
std::string heatmap_document(const GcrModel& model, int label, std::span<const double> symbol_values);

/// Complexity of the interpolated abstraction over its defined stretch.
ComplexityReport abstraction_complexity(const Abstraction& a, std::size_t n);
/// Mean and population std of each measure over the samples where it is defined.
nlohmann::json aggregate_complexity(std::span<const ComplexityReport> reports);

enum class StageState { Ok, Failed, Skipped };
std::string_view to_string(StageState s);

struct StageStatus {
  std::string name;
  StageState state = StageState::Skipped;
  std::optional<ErrorCode> code;
  std::string message;
};

struct PipelineResult {
  std::vector<StageStatus> stages;
  /// Relative paths of every file written, sorted.
  std::vector<std::string> files;
  bool ok() const;
  const StageStatus* failed_stage() const;
  nlohmann::json report() const;
};

/// Runs every stage and writes its outputs under config.output_dir. A failing
/// stage is recorded (code, message) and the stages depending on it are skipped.
PipelineResult run_pipeline(const ExperimentConfig& config);

}  // namespace saxattn
