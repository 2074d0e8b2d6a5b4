#include "saxattn/fixtures.hpp"

#include <bit>
#include <cmath>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "saxattn/error.hpp"

namespace saxattn {

namespace {

double trend_value(int label, std::size_t t, std::size_t n, std::size_t step) {
  const double ramp = static_cast<double>(t) / static_cast<double>(n - 1);
  switch (label) {
    case 0: return 1.0 - ramp;
    case 1: return t < step ? 1.0 : 0.0;
    case 2: return ramp;
    default: return t < step ? 0.0 : 1.0;
  }
}

}  // namespace

RawDataset gen_trend(const TrendParams& params, std::uint64_t seed) {
  if (params.length < 4) throw Error(ErrorCode::BadParams, "trend length must be at least 4");
  if (params.train_per_class == 0) throw Error(ErrorCode::BadParams, "trend needs train samples");
  if (!(params.noise >= 0.0) || 2 * params.jitter + 2 > params.length) {
    throw Error(ErrorCode::BadParams, "trend noise must be >= 0 and the jitter must fit the length");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, params.noise == 0.0 ? 1.0 : params.noise);
  const auto n = params.length;

  RawDataset ds;
  auto emit = [&](std::size_t per_class, Split split) {
    for (std::size_t k = 0; k < per_class * 4; ++k) {
      const int label = static_cast<int>(k % 4);
      const auto shift = static_cast<std::size_t>(rng() % (2 * params.jitter + 1));
      const auto step = n / 2 - params.jitter + shift;
      std::vector<double> s(n);
      for (std::size_t t = 0; t < n; ++t) {
        s[t] = trend_value(label, t, n, step) + (params.noise == 0.0 ? 0.0 : noise(rng));
      }
      ds.series.push_back(std::move(s));
      ds.labels.push_back(label);
      ds.split.push_back(split);
    }
  };
  emit(params.train_per_class, Split::Train);
  emit(params.test_per_class, Split::Test);
  ds.validate();
  return ds;
}

RawDataset gen_counting(const CountingParams& params, std::uint64_t seed) {
  if (params.length < 2 || params.length > 20) throw Error(ErrorCode::BadParams, "counting length must be in [2, 20]");
  const std::size_t total = std::size_t{1} << params.length;
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Fisher-Yates on raw engine output keeps the order identical across standard libraries.
  std::mt19937_64 rng(seed);
  for (std::size_t i = total - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);

  const std::size_t validation = total / 5;
  const std::size_t test = total / 2;
  const std::size_t train = total - validation - test;

  RawDataset ds;
  for (std::size_t k = 0; k < total; ++k) {
    const auto code = order[k];
    std::vector<double> s(params.length);
    for (std::size_t t = 0; t < params.length; ++t) s[t] = static_cast<double>((code >> (params.length - 1 - t)) & 1u);
    const int ones = std::popcount(code);
    ds.series.push_back(std::move(s));
    ds.labels.push_back(params.binary ? (ones >= 5 ? 1 : 0) : ones);
    ds.split.push_back(k < train ? Split::Train : k < train + validation ? Split::Validation : Split::Test);
  }
  ds.validate();
  return ds;
}

RawDataset gen_fixture(std::string_view kind, const nlohmann::json& params, std::uint64_t seed) {
  const auto p = params.is_null() ? nlohmann::json::object() : params;
  if (!p.is_object()) throw Error(ErrorCode::BadParams, "fixture params must be an object");
  try {
    if (kind == "trend") {
      TrendParams t;
      t.length = p.value("length", t.length);
      t.train_per_class = p.value("train_per_class", t.train_per_class);
      t.test_per_class = p.value("test_per_class", t.test_per_class);
      t.noise = p.value("noise", t.noise);
      t.jitter = p.value("jitter", t.jitter);
      return gen_trend(t, seed);
    }
    if (kind == "counting" || kind == "counting-binary") {
      CountingParams c;
      c.length = p.value("length", c.length);
      c.binary = kind == "counting-binary";
      return gen_counting(c, seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadParams, std::string("fixture params: ") + e.what());
  }
  throw Error(ErrorCode::BadParams, "unknown fixture kind '" + std::string(kind) + "'");
}

}  // namespace saxattn
