#include "saxattn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <utility>

#include "saxattn/error.hpp"

namespace saxattn {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "unknown";
}

std::vector<int> RawDataset::classes() const {
  std::set<int> unique(labels.begin(), labels.end());
  return {unique.begin(), unique.end()};
}

std::vector<std::size_t> RawDataset::rows(Split part) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == part) out.push_back(i);
  }
  return out;
}

std::vector<std::vector<double>> RawDataset::series_of(Split part) const {
  std::vector<std::vector<double>> out;
  for (auto i : rows(part)) out.push_back(series[i]);
  return out;
}

std::vector<int> RawDataset::labels_of(Split part) const {
  std::vector<int> out;
  for (auto i : rows(part)) out.push_back(labels[i]);
  return out;
}

void RawDataset::validate() const {
  if (series.size() != labels.size() || series.size() != split.size()) {
    throw Error(ErrorCode::BadDataset, "series, labels and split markers differ in count");
  }
  if (rows(Split::Train).empty()) throw Error(ErrorCode::EmptyTrainSet, "no train rows");
  const auto n = length();
  if (n < 2) throw Error(ErrorCode::BadDataset, "series length must be at least 2");
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series[i].size() != n) {
      throw Error(ErrorCode::BadDataset, "row " + std::to_string(i) + " has length " +
                                             std::to_string(series[i].size()) + ", expected " +
                                             std::to_string(n));
    }
    for (double v : series[i]) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::NonFiniteValue, "row " + std::to_string(i) + " has a non-finite value");
      }
    }
  }
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  if (sep == ' ') {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
      if (j > i) out.push_back(line.substr(i, j - i));
      i = j;
    }
    return out;
  }
  std::size_t start = 0;
  for (;;) {
    auto pos = line.find(sep, start);
    auto field = line.substr(start, pos == std::string_view::npos ? line.npos : pos - start);
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
    out.push_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view field, std::size_t line_no) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(ErrorCode::BadDataset,
                "line " + std::to_string(line_no) + ": cannot parse '" + std::string(field) + "'");
  }
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::NonFiniteValue, "line " + std::to_string(line_no));
  }
  return value;
}

}  // namespace

LabelledRows parse_series_text(std::string_view text) {
  LabelledRows rows;
  char sep = 0;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto eol = text.find('\n');
    auto line = text.substr(0, eol);
    text.remove_prefix(eol == std::string_view::npos ? text.size() : eol + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    if (sep == 0) {
      sep = line.find('\t') != line.npos ? '\t' : line.find(',') != line.npos ? ',' : ' ';
    }
    auto fields = split_fields(line, sep);
    if (fields.size() < 2) {
      throw Error(ErrorCode::BadDataset, "line " + std::to_string(line_no) + ": no values");
    }
    double label = parse_double(fields[0], line_no);
    if (label != std::floor(label)) {
      throw Error(ErrorCode::BadDataset, "line " + std::to_string(line_no) + ": label is not an integer");
    }
    std::vector<double> values;
    values.reserve(fields.size() - 1);
    for (std::size_t k = 1; k < fields.size(); ++k) values.push_back(parse_double(fields[k], line_no));
    rows.labels.push_back(static_cast<int>(label));
    rows.series.push_back(std::move(values));
  }
  return rows;
}

LabelledRows read_series_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_series_text(buffer.str());
}

std::string format_series_text(const LabelledRows& rows) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (std::size_t i = 0; i < rows.series.size(); ++i) {
    out << rows.labels[i];
    for (double v : rows.series[i]) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

void write_series_file(const std::filesystem::path& path, const LabelledRows& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << format_series_text(rows);
}

RawDataset make_dataset(const LabelledRows& train, const LabelledRows& test, const LabelledRows& validation) {
  RawDataset ds;
  auto append = [&ds](const LabelledRows& rows, Split part) {
    for (std::size_t i = 0; i < rows.series.size(); ++i) {
      ds.series.push_back(rows.series[i]);
      ds.labels.push_back(rows.labels[i]);
      ds.split.push_back(part);
    }
  };
  append(train, Split::Train);
  append(validation, Split::Validation);
  append(test, Split::Test);
  ds.validate();
  return ds;
}

RawDataset load_dataset(const std::filesystem::path& train, const std::filesystem::path& test) {
  return make_dataset(read_series_file(train), read_series_file(test));
}

LabelledRows rows_of(const RawDataset& ds, Split part) {
  return {ds.labels_of(part), ds.series_of(part)};
}

std::vector<Prediction> parse_predictions(std::string_view text) {
  std::vector<Prediction> out;
  std::set<std::string, std::less<>> seen;
  bool at_start = true;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto eol = text.find('\n');
    auto line = text.substr(0, eol);
    text.remove_prefix(eol == std::string_view::npos ? text.size() : eol + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    auto fields = split_fields(line, ',');
    if (fields.size() != 2) {
      throw Error(ErrorCode::BadDataset, "predictions line " + std::to_string(line_no) + ": expected sample_id,label");
    }
    const bool first = std::exchange(at_start, false);
    if (first && fields[0] == "sample_id") continue;
    const double label = parse_double(fields[1], line_no);
    if (label != std::floor(label)) {
      throw Error(ErrorCode::BadDataset, "predictions line " + std::to_string(line_no) + ": label is not an integer");
    }
    if (!seen.insert(std::string(fields[0])).second) {
      throw Error(ErrorCode::BadDataset, "duplicate prediction for '" + std::string(fields[0]) + "'");
    }
    out.push_back({std::string(fields[0]), static_cast<int>(label)});
  }
  return out;
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_predictions(buffer.str());
}

std::string format_predictions(std::span<const Prediction> predictions) {
  std::string out = "sample_id,label\n";
  for (const auto& p : predictions) out += p.sample_id + "," + std::to_string(p.label) + "\n";
  return out;
}

}  // namespace saxattn
