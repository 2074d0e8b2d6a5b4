#include "saxattn/bundle.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "saxattn/error.hpp"

namespace saxattn {

static_assert(std::numeric_limits<float>::is_iec559, "binary32 payloads need IEEE-754 floats");

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<char>((v >> shift) & 0xFFu));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + k])) << (8 * k);
  }
  return v;
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) throw Error(ErrorCode::BadBundle, std::string(what) + " too large");
  return static_cast<std::uint32_t>(v);
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

void to_json(nlohmann::json& j, const BundleManifest& m) {
  j = nlohmann::json{{"version", m.version}, {"sample_count", m.sample_count},
                     {"L", m.layers},        {"H", m.heads},
                     {"n", m.n},             {"sample_ids", m.sample_ids}};
  if (m.labels) j["labels"] = *m.labels;
  if (!m.payload.empty()) j["payload"] = m.payload;
}

void from_json(const nlohmann::json& j, BundleManifest& m) {
  try {
    m.version = j.at("version").get<std::uint32_t>();
    m.sample_count = j.at("sample_count").get<std::uint32_t>();
    m.layers = j.at("L").get<std::uint32_t>();
    m.heads = j.at("H").get<std::uint32_t>();
    m.n = j.at("n").get<std::uint32_t>();
    m.sample_ids = j.at("sample_ids").get<std::vector<std::string>>();
    if (j.contains("labels") && !j.at("labels").is_null()) m.labels = j.at("labels").get<std::vector<int>>();
    m.payload = j.value("payload", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadBundle, std::string("manifest: ") + e.what());
  }
  if (m.version != kBundleVersion) throw Error(ErrorCode::BadBundle, "unsupported bundle version");
  if (m.sample_ids.size() != m.sample_count) {
    throw Error(ErrorCode::BadBundle, "sample_ids count does not match sample_count");
  }
  if (m.labels && m.labels->size() != m.sample_count) {
    throw Error(ErrorCode::BadBundle, "labels count does not match sample_count");
  }
}

std::string encode_payload(std::span<const AttentionStack> stacks) {
  std::uint32_t layers = 0, heads = 0, n = 0;
  if (!stacks.empty()) {
    layers = checked_u32(stacks.front().layers(), "L");
    heads = checked_u32(stacks.front().heads(), "H");
    n = checked_u32(stacks.front().length(), "n");
  }
  std::string out(kBundleMagic);
  put_u32(out, kBundleVersion);
  put_u32(out, checked_u32(stacks.size(), "sample_count"));
  put_u32(out, layers);
  put_u32(out, heads);
  put_u32(out, n);
  out.reserve(out.size() + stacks.size() * layers * heads * n * n * 4);
  for (const auto& s : stacks) {
    if (s.layers() != layers || s.heads() != heads || s.length() != n) {
      throw Error(ErrorCode::BadBundle, "stacks in one bundle must share (L, H, n)");
    }
    for (double v : s.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

std::vector<AttentionStack> decode_payload(std::string_view bytes, const BundleManifest& manifest) {
  constexpr std::size_t header = 4 + 5 * 4;
  if (bytes.size() < header || bytes.substr(0, 4) != kBundleMagic) {
    throw Error(ErrorCode::BadBundle, "payload does not start with ATNB");
  }
  const auto version = get_u32(bytes, 4);
  const auto count = get_u32(bytes, 8);
  const auto layers = get_u32(bytes, 12);
  const auto heads = get_u32(bytes, 16);
  const auto n = get_u32(bytes, 20);
  if (version != kBundleVersion) throw Error(ErrorCode::BadBundle, "unsupported payload version");
  if (count != manifest.sample_count || layers != manifest.layers || heads != manifest.heads || n != manifest.n) {
    throw Error(ErrorCode::BadBundle, "payload header disagrees with manifest");
  }
  const std::size_t per_sample = static_cast<std::size_t>(layers) * heads * n * n;
  if (bytes.size() != header + per_sample * count * 4) {
    throw Error(ErrorCode::BadBundle, "payload size does not match its header");
  }
  std::vector<AttentionStack> stacks;
  stacks.reserve(count);
  std::size_t offset = header;
  for (std::uint32_t s = 0; s < count; ++s) {
    AttentionStack stack(layers, heads, n, manifest.sample_ids[s]);
    for (auto& v : stack.values()) {
      v = static_cast<double>(std::bit_cast<float>(get_u32(bytes, offset)));
      offset += 4;
    }
    stacks.push_back(std::move(stack));
  }
  return stacks;
}

AttentionBundle make_bundle(std::vector<AttentionStack> stacks, std::optional<std::vector<int>> labels) {
  AttentionBundle bundle;
  auto& m = bundle.manifest;
  m.sample_count = checked_u32(stacks.size(), "sample_count");
  if (!stacks.empty()) {
    m.layers = checked_u32(stacks.front().layers(), "L");
    m.heads = checked_u32(stacks.front().heads(), "H");
    m.n = checked_u32(stacks.front().length(), "n");
  }
  for (std::size_t i = 0; i < stacks.size(); ++i) {
    m.sample_ids.push_back(stacks[i].sample_id().empty() ? std::to_string(i) : stacks[i].sample_id());
  }
  if (labels && labels->size() != stacks.size()) throw Error(ErrorCode::BadBundle, "labels count mismatch");
  m.labels = std::move(labels);
  bundle.stacks = std::move(stacks);
  return bundle;
}

void write_bundle(const std::filesystem::path& manifest_path, AttentionBundle& bundle) {
  auto payload_name = manifest_path.stem().string() + ".bin";
  bundle.manifest.payload = payload_name;
  const auto payload_path = manifest_path.parent_path() / payload_name;
  {
    std::ofstream out(payload_path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + payload_path.string());
    const auto bytes = encode_payload(bundle.stacks);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + manifest_path.string());
  out << nlohmann::json(bundle.manifest).dump(2) << '\n';
}

AttentionBundle parse_bundle(const nlohmann::json& manifest_json, std::string_view payload, bool validate) {
  AttentionBundle bundle;
  bundle.manifest = manifest_json.get<BundleManifest>();
  bundle.stacks = decode_payload(payload, bundle.manifest);
  if (validate) {
    for (const auto& s : bundle.stacks) validate_stack(s);
  }
  return bundle;
}

AttentionBundle read_bundle(const std::filesystem::path& manifest_path, bool validate) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(slurp(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadBundle, manifest_path.string() + ": " + e.what());
  }
  const auto name = manifest.value("payload", manifest_path.stem().string() + ".bin");
  return parse_bundle(manifest, slurp(manifest_path.parent_path() / name), validate);
}

}  // namespace saxattn
