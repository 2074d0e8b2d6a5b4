#include "saxattn/lasa.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "saxattn/error.hpp"

namespace saxattn {

namespace {

std::string format_number(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

}  // namespace

std::string ThresholdSpec::str() const {
  return std::string(mode == ThresholdMode::Average ? "avg" : "max") + "[" + format_number(s1) + "," +
         format_number(s2) + "]";
}

ThresholdSpec ThresholdSpec::parse(std::string_view text) {
  const auto open = text.find('[');
  const auto comma = text.find(',');
  if (open == std::string_view::npos || comma == std::string_view::npos || comma < open || text.back() != ']') {
    throw Error(ErrorCode::BadParams, "threshold spec must look like avg[1,1.2], got '" + std::string(text) + "'");
  }
  ThresholdSpec spec;
  const auto mode = text.substr(0, open);
  if (mode == "avg" || mode == "average") {
    spec.mode = ThresholdMode::Average;
  } else if (mode == "max" || mode == "maximum") {
    spec.mode = ThresholdMode::Maximum;
  } else {
    throw Error(ErrorCode::BadParams, "threshold mode must be avg or max, got '" + std::string(mode) + "'");
  }
  auto number = [&](std::string_view part) {
    double v = 0.0;
    const auto* end = part.data() + part.size();
    auto [ptr, ec] = std::from_chars(part.data(), end, v);
    if (ec != std::errc{} || ptr != end) {
      throw Error(ErrorCode::BadParams, "bad number '" + std::string(part) + "' in threshold spec");
    }
    return v;
  };
  spec.s1 = number(text.substr(open + 1, comma - open - 1));
  spec.s2 = number(text.substr(comma + 1, text.size() - comma - 2));
  return spec;
}

std::vector<ThresholdSpec> default_threshold_grid() {
  return {{ThresholdMode::Average, 1.0, 1.2},
          {ThresholdMode::Average, 0.8, 1.5},
          {ThresholdMode::Maximum, 2.0, 3.0},
          {ThresholdMode::Maximum, 1.8, -1.0}};
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::High: return "high";
    case Provenance::MediumCenter: return "medium_center";
    case Provenance::MediumAbsorbed: return "medium_absorbed";
    case Provenance::Dropped: return "dropped";
  }
  return "unknown";
}

Thresholds resolve_thresholds(std::span<const double> lava, const ThresholdSpec& spec) {
  if (lava.empty()) throw Error(ErrorCode::EmptyBatch, "empty LAVA");
  if (spec.s1 == 0.0 || spec.s2 == 0.0) throw Error(ErrorCode::ZeroDivisor, "threshold divisor is zero");
  double base = 0.0;
  if (spec.mode == ThresholdMode::Average) {
    base = std::accumulate(lava.begin(), lava.end(), 0.0) / static_cast<double>(lava.size());
  } else {
    base = *std::max_element(lava.begin(), lava.end());
  }
  Thresholds t;
  t.high = base / spec.s1;
  t.low = spec.s2 <= 0.0 ? -std::numeric_limits<double>::infinity() : base / spec.s2;
  return t;
}

Abstraction abstract_series(const SymbolizedSeries& x, std::span<const double> lava, Thresholds t) {
  const auto n = x.values.size();
  if (lava.size() != n) {
    throw Error(ErrorCode::LengthMismatch,
                "LAVA has " + std::to_string(lava.size()) + " entries, series has " + std::to_string(n));
  }
  if (!(t.high >= t.low)) throw Error(ErrorCode::BadParams, "t1 must not be below t2");

  Abstraction out;
  out.thresholds = t;
  out.provenance.assign(n, Provenance::Dropped);
  std::size_t i = 0;
  while (i < n) {
    if (lava[i] > t.high) {
      out.provenance[i] = Provenance::High;
      out.kept.push_back({i, x.values[i]});
      ++i;
    } else if (lava[i] > t.low) {
      std::size_t end = i;
      while (end + 1 < n && lava[end + 1] > t.low && lava[end + 1] <= t.high) ++end;
      std::vector<double> run(x.values.begin() + static_cast<std::ptrdiff_t>(i),
                              x.values.begin() + static_cast<std::ptrdiff_t>(end + 1));
      std::sort(run.begin(), run.end());
      const auto center = (i + end) / 2;
      for (std::size_t k = i; k <= end; ++k) out.provenance[k] = Provenance::MediumAbsorbed;
      out.provenance[center] = Provenance::MediumCenter;
      out.kept.push_back({center, run[(run.size() - 1) / 2]});
      i = end + 1;
    } else {
      ++i;
    }
  }
  out.reduction = n == 0 ? 0.0 : static_cast<double>(n - out.kept.size()) / static_cast<double>(n);
  return out;
}

Abstraction abstract_series(const SymbolizedSeries& x, const Lava& lava, Thresholds t) {
  auto out = abstract_series(x, std::span<const double>(lava.values), t);
  out.sample_id = lava.sample_id;
  out.combo = lava.combo.str();
  return out;
}

ValidationSeries interpolate(const Abstraction& a, std::size_t n) {
  ValidationSeries out;
  out.values.assign(n, 0.0);
  out.mask.assign(n, false);
  for (std::size_t k = 0; k < a.kept.size(); ++k) {
    const auto& p = a.kept[k];
    if (p.position >= n) throw Error(ErrorCode::LengthMismatch, "kept position beyond series length");
    out.values[p.position] = p.value;
    out.mask[p.position] = true;
    if (k + 1 == a.kept.size()) break;
    const auto& q = a.kept[k + 1];
    const double span = static_cast<double>(q.position - p.position);
    for (auto pos = p.position + 1; pos < q.position && pos < n; ++pos) {
      out.values[pos] = p.value + (q.value - p.value) * static_cast<double>(pos - p.position) / span;
      out.mask[pos] = true;
    }
  }
  return out;
}

ReductionStats reduction_stats(std::span<const Abstraction> batch) {
  if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "no abstractions");
  ReductionStats s;
  for (const auto& a : batch) s.mean += a.reduction;
  s.mean /= static_cast<double>(batch.size());
  double sq = 0.0;
  for (const auto& a : batch) sq += (a.reduction - s.mean) * (a.reduction - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(batch.size()));
  return s;
}

nlohmann::json abstraction_record(const Abstraction& a) {
  auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json kept = nlohmann::json::array();
  for (const auto& p : a.kept) kept.push_back({p.position, p.value});
  return {{"sample_id", a.sample_id}, {"combo", a.combo},   {"t1", finite_or_null(a.thresholds.high)},
          {"t2", finite_or_null(a.thresholds.low)}, {"kept", kept}, {"reduction", a.reduction}};
}

std::string validation_csv(const ValidationSeries& v) {
  std::ostringstream out;
  out.precision(17);
  out << "position,value,mask\n";
  for (std::size_t i = 0; i < v.values.size(); ++i) {
    out << i << ',';
    if (v.mask[i]) out << v.values[i];
    out << ',' << (v.mask[i] ? 1 : 0) << '\n';
  }
  return out.str();
}

void to_json(nlohmann::json& j, const ThresholdSpec& spec) {
  j = {{"mode", spec.mode == ThresholdMode::Average ? "avg" : "max"}, {"s1", spec.s1}, {"s2", spec.s2}};
}

void from_json(const nlohmann::json& j, ThresholdSpec& spec) {
  try {
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "avg") {
      spec.mode = ThresholdMode::Average;
    } else if (mode == "max") {
      spec.mode = ThresholdMode::Maximum;
    } else {
      throw Error(ErrorCode::BadParams, "threshold mode must be 'avg' or 'max'");
    }
    spec.s1 = j.at("s1").get<double>();
    spec.s2 = j.at("s2").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadParams, std::string("threshold spec: ") + e.what());
  }
}

}  // namespace saxattn
