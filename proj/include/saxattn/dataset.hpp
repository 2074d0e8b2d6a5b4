#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace saxattn {

enum class Split { Train, Validation, Test };

std::string_view to_string(Split split);

/// Univariate labelled series, all of one length, tagged with their partition.
struct RawDataset {
  std::vector<std::vector<double>> series;
  std::vector<int> labels;
  std::vector<Split> split;

  std::size_t size() const noexcept { return series.size(); }
  std::size_t length() const noexcept { return series.empty() ? 0 : series.front().size(); }

  /// Sorted distinct labels.
  std::vector<int> classes() const;

  /// Row indices belonging to `part`, in file order.
  std::vector<std::size_t> rows(Split part) const;
  std::vector<std::vector<double>> series_of(Split part) const;
  std::vector<int> labels_of(Split part) const;

  /// Throws BadDataset / EmptyTrainSet / NonFiniteValue when the invariants
  /// (equal length >= 2, non-empty train, finite values) do not hold.
  void validate() const;
};

struct LabelledRows {
  std::vector<int> labels;
  std::vector<std::vector<double>> series;
};

/// One series per line: integer label then the values. Comma, tab or
/// whitespace separated; the separator is taken from the first data line.
LabelledRows read_series_file(const std::filesystem::path& path);
LabelledRows parse_series_text(std::string_view text);
void write_series_file(const std::filesystem::path& path, const LabelledRows& rows);
std::string format_series_text(const LabelledRows& rows);

RawDataset load_dataset(const std::filesystem::path& train, const std::filesystem::path& test);
/// Rows are laid out train, validation, test.
RawDataset make_dataset(const LabelledRows& train, const LabelledRows& test, const LabelledRows& validation = {});
LabelledRows rows_of(const RawDataset& ds, Split part);

/// One line of a predictions file: "sample_id,label".
struct Prediction {
  std::string sample_id;
  int label = 0;
  bool operator==(const Prediction&) const = default;
};

/// Optional "sample_id,label" header; duplicate ids are rejected.
std::vector<Prediction> parse_predictions(std::string_view text);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);
std::string format_predictions(std::span<const Prediction> predictions);

}  // namespace saxattn
