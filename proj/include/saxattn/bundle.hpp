#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "saxattn/attention.hpp"

namespace saxattn {

inline constexpr std::uint32_t kBundleVersion = 1;
inline constexpr std::string_view kBundleMagic = "ATNB";

/// Sidecar JSON describing a binary attention payload.
struct BundleManifest {
  std::uint32_t version = kBundleVersion;
  std::uint32_t sample_count = 0;
  std::uint32_t layers = 0;
  std::uint32_t heads = 0;
  std::uint32_t n = 0;
  std::vector<std::string> sample_ids;
  std::optional<std::vector<int>> labels;
  /// Payload file name, relative to the manifest's directory.
  std::string payload;
};

struct AttentionBundle {
  BundleManifest manifest;
  std::vector<AttentionStack> stacks;
};

void to_json(nlohmann::json& j, const BundleManifest& m);
void from_json(const nlohmann::json& j, BundleManifest& m);

/// Payload bytes: "ATNB", then version, sample_count, L, H, n as u32 LE, then
/// binary32 LE values in (sample, layer, head, row, col) order.
std::string encode_payload(std::span<const AttentionStack> stacks);
std::vector<AttentionStack> decode_payload(std::string_view bytes, const BundleManifest& manifest);

/// Builds a manifest for `stacks`, taking sample ids from the stacks.
AttentionBundle make_bundle(std::vector<AttentionStack> stacks, std::optional<std::vector<int>> labels = {});

/// Writes `<manifest_path>` and the payload next to it (same stem, ".bin").
void write_bundle(const std::filesystem::path& manifest_path, AttentionBundle& bundle);

/// Reads and, unless told otherwise, validates every matrix for row-stochasticity.
AttentionBundle read_bundle(const std::filesystem::path& manifest_path, bool validate = true);
AttentionBundle parse_bundle(const nlohmann::json& manifest, std::string_view payload, bool validate = true);

}  // namespace saxattn
