#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

#include "saxattn/dataset.hpp"

namespace saxattn {

/// Four trend classes: 0 slow fall, 1 sudden fall, 2 slow rise, 3 sudden rise.
struct TrendParams {
  std::size_t length = 30;
  std::size_t train_per_class = 25;
  std::size_t test_per_class = 25;
  double noise = 0.1;
  /// Maximum shift of the sudden step away from the middle, in positions.
  std::size_t jitter = 3;
};

/// Every binary sequence of `length`, labelled by its number of ones (or, in
/// binary mode, 1 when that number is at least 5).
struct CountingParams {
  std::size_t length = 10;
  bool binary = false;
};

RawDataset gen_trend(const TrendParams& params, std::uint64_t seed);

/// Rows come in seeded shuffled order and are split validation = floor(0.2 N),
/// test = floor(0.5 N), train = the rest (308/204/512 for N = 1024); the
/// dataset lists train, then validation, then test rows.
RawDataset gen_counting(const CountingParams& params, std::uint64_t seed);

/// kind is "trend", "counting" or "counting-binary"; params may override the
/// fields of the matching parameter struct.
RawDataset gen_fixture(std::string_view kind, const nlohmann::json& params, std::uint64_t seed);

}  // namespace saxattn
