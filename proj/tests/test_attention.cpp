#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "saxattn/attention.hpp"
#include "saxattn/bundle.hpp"
#include "saxattn/error.hpp"

using namespace saxattn;

namespace {

Matrix from_rows(std::vector<std::vector<double>> rows) {
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("positional encoding") {
  const auto pe = positional_encoding(4, 2);
  for (std::size_t pos = 0; pos < 4; ++pos) {
    CHECK(pe(pos, 0) == doctest::Approx(std::sin(static_cast<double>(pos))));
    CHECK(pe(pos, 1) == doctest::Approx(std::cos(static_cast<double>(pos))));
  }
  const auto wide = positional_encoding(7, 8);
  for (std::size_t k = 0; k < 8; k += 2) {
    CHECK(wide(0, k) == 0.0);
    CHECK(wide(0, k + 1) == 1.0);
  }
  for (double v : wide.values()) CHECK(std::abs(v) <= 1.0);
  CHECK(wide(3, 2) == doctest::Approx(std::sin(3.0 / std::pow(10000.0, 2.0 / 8.0))));
  CHECK(code_of([] { positional_encoding(4, 3); }) == ErrorCode::OddDimension);
  CHECK(code_of([] { positional_encoding(4, 0); }) == ErrorCode::OddDimension);
}

TEST_CASE("attention matrix") {
  const Matrix zero(3, 2);
  const auto uniform = attention_matrix(zero, zero);
  for (double v : uniform.values()) CHECK(v == 1.0 / 3.0);

  const auto sat = attention_matrix(from_rows({{10}, {0}}), from_rows({{10}, {0}}));
  CHECK(sat(0, 0) == doctest::Approx(1.0));
  CHECK(sat(0, 1) == doctest::Approx(std::exp(-100.0)));
  CHECK(sat(1, 0) == doctest::Approx(0.5));

  Matrix bad(2, 1);
  bad(1, 0) = NAN;
  CHECK(code_of([&] { attention_matrix(bad, zero); }) == ErrorCode::DimensionMismatch);
  CHECK(code_of([&] { attention_matrix(bad, Matrix(2, 1)); }) == ErrorCode::NonFiniteValue);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0.0, 4.0);
  for (int t = 0; t < 100; ++t) {
    Matrix q(5, 3), k(5, 3);
    for (auto& v : q.values()) v = nd(rng);
    for (auto& v : k.values()) v = nd(rng);
    const auto a = attention_matrix(q, k);
    for (std::size_t i = 0; i < 5; ++i) {
      double sum = 0.0;
      for (double v : a.row(i)) {
        CHECK(v >= 0.0);
        sum += v;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("forward attention") {
  SymbolizedSeries x{{0, 2, 1, 2}, {-1, 1, 0, 1}, 0};
  SUBCASE("zero weights give uniform matrices") {
    const auto w = MhaWeights::zeros(2, 3, 4, 2);
    for (bool pe : {false, true}) {
      const auto s = forward_attention(x, w, pe, "a");
      CHECK(s.layers() == 2);
      CHECK(s.heads() == 3);
      CHECK(s.length() == 4);
      for (double v : s.values()) CHECK(v == 0.25);
    }
  }
  SUBCASE("one scalar head matches a direct softmax") {
    auto w = MhaWeights::zeros(1, 1, 1, 1);
    w.query[0](0, 0) = 1.0;
    w.key[0](0, 0) = 1.0;
    const auto s = forward_attention(x, w, false);
    for (std::size_t i = 0; i < 4; ++i) {
      double denom = 0.0;
      for (std::size_t j = 0; j < 4; ++j) denom += std::exp(x.values[i] * x.values[j]);
      for (std::size_t j = 0; j < 4; ++j) {
        CHECK(s.at(0, 0, i, j) == doctest::Approx(std::exp(x.values[i] * x.values[j]) / denom).epsilon(1e-12));
      }
    }
  }
  SUBCASE("random weights are deterministic and row-stochastic") {
    const auto w = MhaWeights::random(3, 2, 6, 3, 42);
    const auto a = forward_attention(x, w, true);
    CHECK(a == forward_attention(x, MhaWeights::random(3, 2, 6, 3, 42), true));
    CHECK_NOTHROW(validate_stack(a, 1e-9));
  }
  SUBCASE("inconsistent weights") {
    auto w = MhaWeights::zeros(1, 2, 4, 2);
    w.key.pop_back();
    CHECK(code_of([&] { forward_attention(x, w, false); }) == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("combo tags") {
  CHECK(ComboTag::parse("hl-ms").str() == "hl-ms");
  CHECK(ComboTag::parse("hl-max-sum").str() == "hl-ms");
  CHECK(ComboTag::parse("lh-sum-max-max").str() == "lh-smm");
  const auto t = ComboTag::parse("hl-msm");
  CHECK(t.step3 == Reduce::Max);
  CHECK(t.matrix_part().str() == "hl-ms");
  for (const char* bad : {"", "hl", "xx-ms", "hl-m", "hl-mmmm", "hl-mx", "hl-max-avg", "hl-max"}) {
    CHECK_MESSAGE(code_of([&] { ComboTag::parse(bad); }) == ErrorCode::BadCombo, bad);
  }
  CHECK(all_matrix_combos().size() == 8);
}

TEST_CASE("LAMA and LAVA worked examples") {
  AttentionStack s(1, 2, 2);
  s.set_matrix(0, 0, from_rows({{1, 0}, {0, 1}}));
  s.set_matrix(0, 1, from_rows({{0, 1}, {1, 0}}));
  CHECK(aggregate_lama(s, ComboTag::parse("hl-mm")).matrix == Matrix(2, 2, 1.0));
  CHECK(aggregate_lama(s, ComboTag::parse("hl-ss")).matrix == Matrix(2, 2, 1.0));

  AttentionStack single(1, 1, 2);
  const auto m = from_rows({{0.3, 0.7}, {0.6, 0.4}});
  single.set_matrix(0, 0, m);
  for (const auto& combo : all_matrix_combos()) CHECK(aggregate_lama(single, combo).matrix == m);

  const Lama lama{from_rows({{1, 2}, {3, 4}}), ComboTag::parse("hl-ms"), "x"};
  CHECK(aggregate_lava(lama, Reduce::Max).values == std::vector<double>{2, 4});
  CHECK(aggregate_lava(lama, Reduce::Sum).values == std::vector<double>{3, 7});
  CHECK(aggregate_lava(lama, Reduce::Sum).combo.str() == "hl-mss");
  const Lama eye{from_rows({{1, 0}, {0, 1}}), {}, ""};
  CHECK(aggregate_lava(eye, Reduce::Max).values == std::vector<double>{1, 1});

  CHECK(code_of([&] { aggregate_lava(s, ComboTag::parse("hl-ms")); }) == ErrorCode::BadCombo);
}

TEST_CASE("property: aggregation matches the brute-force oracle") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 100; ++t) {
    const std::size_t L = 1 + rng() % 3, H = 1 + rng() % 3, n = 1 + rng() % 6;
    const auto s = oracle::random_stack(rng, L, H, n);
    for (const auto& combo : all_matrix_combos()) {
      const auto got = aggregate_lama(s, combo);
      CHECK(got.matrix == oracle::lama(s, combo));
      for (auto step3 : {Reduce::Max, Reduce::Sum}) {
        CHECK(aggregate_lava(got, step3).values == oracle::lava(got.matrix, step3 == Reduce::Max));
      }
    }
    CHECK(aggregate_lama(s, ComboTag::parse("hl-mm")).matrix == aggregate_lama(s, ComboTag::parse("lh-mm")).matrix);
    CHECK(aggregate_lama(s, ComboTag::parse("hl-ss")).matrix == aggregate_lama(s, ComboTag::parse("lh-ss")).matrix);
    // A single row-stochastic matrix sums each row to one.
    const auto one = aggregate_lava(aggregate_lama(oracle::random_stack(rng, 1, 1, n), ComboTag::parse("hl-mm")),
                                    Reduce::Sum);
    for (double v : one.values) CHECK(v == doctest::Approx(1.0));
  }
}

TEST_CASE("stack validation never renormalizes") {
  AttentionStack s(1, 1, 2);
  s.set_matrix(0, 0, from_rows({{0.5, 0.50005}, {1, 0}}));
  CHECK_NOTHROW(validate_stack(s));
  s.at(0, 0, 0, 1) = 0.6;
  CHECK(code_of([&] { validate_stack(s); }) == ErrorCode::NonStochasticRows);
  CHECK(s.at(0, 0, 0, 1) == 0.6);
  s.set_matrix(0, 0, from_rows({{1.5, -0.5}, {1, 0}}));
  CHECK(code_of([&] { validate_stack(s); }) == ErrorCode::NonStochasticRows);
}

TEST_CASE("bundle payload layout") {
  AttentionStack s(1, 1, 2, "s0");
  s.set_matrix(0, 0, from_rows({{0.25, 0.75}, {1, 0}}));
  const std::vector<AttentionStack> stacks{s};
  const auto bytes = encode_payload(stacks);
  REQUIRE(bytes.size() == 24 + 4 * 4);
  CHECK(bytes.substr(0, 4) == "ATNB");
  const std::string header = bytes.substr(4, 20);
  const unsigned char expect[20] = {1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0};
  for (int k = 0; k < 20; ++k) CHECK(static_cast<unsigned char>(header[static_cast<std::size_t>(k)]) == expect[k]);
  // 0.25f = 0x3E800000, little endian
  CHECK(static_cast<unsigned char>(bytes[24]) == 0x00);
  CHECK(static_cast<unsigned char>(bytes[27]) == 0x3E);
  CHECK(static_cast<unsigned char>(bytes[26]) == 0x80);
}

TEST_CASE("bundle round trip is lossless at binary32") {
  std::mt19937_64 rng(5);
  std::vector<AttentionStack> stacks;
  for (int k = 0; k < 4; ++k) {
    auto s = oracle::random_stack(rng, 2, 3, 5);
    s.set_sample_id("sample-" + std::to_string(k));
    stacks.push_back(s);
  }
  auto bundle = make_bundle(stacks, std::vector<int>{0, 1, 0, 1});
  const auto dir = std::filesystem::temp_directory_path() / "saxattn_bundle_test";
  std::filesystem::create_directories(dir);
  write_bundle(dir / "attn.json", bundle);
  CHECK(std::filesystem::exists(dir / "attn.bin"));
  const auto back = read_bundle(dir / "attn.json");
  CHECK(back.manifest.sample_ids == bundle.manifest.sample_ids);
  CHECK(back.manifest.labels == bundle.manifest.labels);
  REQUIRE(back.stacks.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t e = 0; e < stacks[k].values().size(); ++e) {
      CHECK(back.stacks[k].values()[e] == static_cast<double>(static_cast<float>(stacks[k].values()[e])));
    }
  }
  // Writing the decoded stacks again reproduces the payload byte for byte.
  CHECK(encode_payload(back.stacks) == encode_payload(stacks));

  auto manifest = nlohmann::json::parse(std::ifstream(dir / "attn.json"));
  CHECK(manifest["L"] == 2);
  CHECK(manifest["H"] == 3);
  CHECK(manifest["n"] == 5);
  CHECK(manifest["version"] == 1);
  CHECK(manifest["sample_count"] == 4);

  auto payload = encode_payload(stacks);
  CHECK(code_of([&] { parse_bundle(manifest, payload.substr(0, payload.size() - 1)); }) == ErrorCode::BadBundle);
  std::string wrong_magic = payload;
  wrong_magic[0] = 'X';
  CHECK(code_of([&] { parse_bundle(manifest, wrong_magic); }) == ErrorCode::BadBundle);
  auto wrong_n = manifest;
  wrong_n["n"] = 4;
  CHECK(code_of([&] { parse_bundle(wrong_n, payload); }) == ErrorCode::BadBundle);

  auto skewed = stacks;
  skewed[2].at(1, 1, 0, 0) += 0.01;
  CHECK(code_of([&] { parse_bundle(manifest, encode_payload(skewed)); }) == ErrorCode::NonStochasticRows);
  CHECK_NOTHROW(parse_bundle(manifest, encode_payload(skewed), false));
  std::filesystem::remove_all(dir);
}
