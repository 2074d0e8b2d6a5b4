#include "saxattn/config.hpp"

#include <fstream>
#include <numeric>
#include <set>

#include "saxattn/bundle.hpp"
#include "saxattn/error.hpp"
#include "saxattn/fixtures.hpp"

namespace saxattn {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void reject_unknown(const json& j, std::initializer_list<std::string_view> known, const char* where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (!ok) throw Error(ErrorCode::BadConfig, std::string(where) + ": unknown key '" + key + "'");
  }
}

fs::path resolve(const fs::path& base, const json& value) {
  fs::path p = value.get<std::string>();
  return p.is_absolute() || base.empty() ? p : base / p;
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  throw Error(ErrorCode::BadConfig, "unknown split '" + s + "'");
}

template <class T, class F>
std::vector<T> parse_list(const json& j, const char* key, F&& parse_one) {
  if (!j.is_array()) throw Error(ErrorCode::BadConfig, std::string(key) + " must be a list");
  std::vector<T> out;
  for (const auto& item : j) out.push_back(parse_one(item));
  if (out.empty()) throw Error(ErrorCode::BadConfig, std::string(key) + " must not be empty");
  return out;
}

ThresholdSpec parse_threshold(const json& item) {
  if (item.is_string()) return ThresholdSpec::parse(item.get<std::string>());
  return item.get<ThresholdSpec>();
}

}  // namespace

std::vector<ComboTag> default_lasa_combos() {
  std::vector<ComboTag> out;
  for (auto s1 : {Reduce::Max, Reduce::Sum})
    for (auto s2 : {Reduce::Max, Reduce::Sum})
      for (auto s3 : {Reduce::Max, Reduce::Sum}) out.push_back({AxisOrder::HeadsThenLayers, s1, s2, s3});
  return out;
}

std::vector<ComboTag> default_gcr_combos() {
  std::vector<ComboTag> out;
  for (auto s1 : {Reduce::Max, Reduce::Sum})
    for (auto s2 : {Reduce::Max, Reduce::Sum}) out.push_back({AxisOrder::HeadsThenLayers, s1, s2, std::nullopt});
  return out;
}

ExperimentConfig parse_config(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorCode::BadConfig, "config must be a JSON object");
  ExperimentConfig c;
  c.lasa_combos = default_lasa_combos();
  c.thresholds = default_threshold_grid();
  c.gcr_combos = default_gcr_combos();
  c.variants = default_variant_grid();
  try {
    reject_unknown(j,
                   {"version", "dataset", "attention", "symbol_count", "lasa", "gcr", "certainty_steps",
                    "predictions", "baseline_predictions", "output_dir", "seed"},
                   "config");
    if (j.contains("version") && j.at("version").get<int>() != kConfigVersion) {
      throw Error(ErrorCode::BadConfig, "unsupported config version");
    }
    c.seed = j.value("seed", std::uint64_t{0});

    const auto& d = j.at("dataset");
    reject_unknown(d, {"train", "validation", "test", "fixture"}, "dataset");
    if (d.contains("fixture")) {
      const auto& f = d.at("fixture");
      reject_unknown(f, {"kind", "params", "seed"}, "dataset.fixture");
      c.dataset.fixture = FixtureSpec{f.at("kind").get<std::string>(), f.value("params", json::object()),
                                      f.value("seed", c.seed)};
      if (d.contains("train") || d.contains("test") || d.contains("validation")) {
        throw Error(ErrorCode::BadConfig, "dataset takes either files or a fixture");
      }
    } else {
      c.dataset.train = resolve(base_dir, d.at("train"));
      c.dataset.test = resolve(base_dir, d.at("test"));
      if (d.contains("validation")) c.dataset.validation = resolve(base_dir, d.at("validation"));
    }

    const auto a = j.value("attention", json{{"generate", json::object()}});
    reject_unknown(a, {"bundles", "bundle", "generate"}, "attention");
    if (a.size() != 1) throw Error(ErrorCode::BadConfig, "attention takes exactly one of bundles, bundle, generate");
    if (a.contains("bundles")) {
      for (const auto& [split, path] : a.at("bundles").items()) {
        c.attention.bundles[parse_split(split)] = resolve(base_dir, path);
      }
    } else if (a.contains("bundle")) {
      c.attention.bundle = resolve(base_dir, a.at("bundle"));
    } else {
      const auto& g = a.at("generate");
      reject_unknown(g, {"layers", "heads", "d_model", "d_k", "weights", "scale", "use_pe", "seed"},
                     "attention.generate");
      GenerateSpec spec;
      spec.layers = g.value("layers", spec.layers);
      spec.heads = g.value("heads", spec.heads);
      spec.d_model = g.value("d_model", spec.d_model);
      spec.d_k = g.value("d_k", spec.d_k);
      spec.weights = g.value("weights", spec.weights);
      spec.scale = g.value("scale", spec.scale);
      spec.use_pe = g.value("use_pe", spec.use_pe);
      spec.seed = g.value("seed", c.seed);
      if (spec.weights != "zero" && spec.weights != "random") {
        throw Error(ErrorCode::BadConfig, "attention.generate.weights must be 'zero' or 'random'");
      }
      c.attention.generate = spec;
    }

    c.symbol_count = j.value("symbol_count", c.symbol_count);
    if (c.symbol_count < 2) throw Error(ErrorCode::BadSymbolCount, "symbol_count must be at least 2");

    if (j.contains("lasa")) {
      const auto& l = j.at("lasa");
      reject_unknown(l, {"combos", "thresholds"}, "lasa");
      if (l.contains("combos")) {
        c.lasa_combos = parse_list<ComboTag>(l.at("combos"), "lasa.combos", [](const json& item) {
          auto tag = ComboTag::parse(item.get<std::string>());
          if (!tag.step3) throw Error(ErrorCode::BadCombo, "lasa combos need a third step, got " + tag.str());
          return tag;
        });
      }
      if (l.contains("thresholds")) {
        c.thresholds = parse_list<ThresholdSpec>(l.at("thresholds"), "lasa.thresholds", parse_threshold);
      }
    }
    if (j.contains("gcr")) {
      const auto& g = j.at("gcr");
      reject_unknown(g, {"combos", "variants", "heatmaps"}, "gcr");
      if (g.contains("combos")) {
        c.gcr_combos = parse_list<ComboTag>(g.at("combos"), "gcr.combos", [](const json& item) {
          return ComboTag::parse(item.get<std::string>()).matrix_part();
        });
      }
      if (g.contains("variants")) {
        c.variants = parse_list<GcrVariant>(g.at("variants"), "gcr.variants",
                                            [](const json& item) { return GcrVariant::parse(item.get<std::string>()); });
      }
      c.export_heatmaps = g.value("heatmaps", c.export_heatmaps);
    }
    if (j.contains("certainty_steps")) {
      c.certainty_steps = j.at("certainty_steps").get<std::vector<double>>();
      for (double s : c.certainty_steps) {
        if (!(s > 0.0 && s <= 100.0)) throw Error(ErrorCode::BadFraction, "certainty steps are percentages in (0, 100]");
      }
    }
    if (j.contains("predictions")) c.predictions = resolve(base_dir, j.at("predictions"));
    if (j.contains("baseline_predictions")) c.baseline_predictions = resolve(base_dir, j.at("baseline_predictions"));
    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j.at("output_dir"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadConfig, e.what());
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadConfig, path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

json ExperimentConfig::to_json() const {
  json j;
  j["version"] = kConfigVersion;
  j["seed"] = seed;
  json d = json::object();
  if (dataset.fixture) {
    d["fixture"] = {{"kind", dataset.fixture->kind}, {"params", dataset.fixture->params}, {"seed", dataset.fixture->seed}};
  } else {
    if (dataset.train) d["train"] = dataset.train->string();
    if (dataset.validation) d["validation"] = dataset.validation->string();
    if (dataset.test) d["test"] = dataset.test->string();
  }
  j["dataset"] = d;
  json a = json::object();
  if (!attention.bundles.empty()) {
    json b = json::object();
    for (const auto& [split, path] : attention.bundles) b[std::string(to_string(split))] = path.string();
    a["bundles"] = b;
  } else if (attention.bundle) {
    a["bundle"] = attention.bundle->string();
  } else if (attention.generate) {
    const auto& g = *attention.generate;
    a["generate"] = {{"layers", g.layers}, {"heads", g.heads},   {"d_model", g.d_model}, {"d_k", g.d_k},
                     {"weights", g.weights}, {"scale", g.scale}, {"use_pe", g.use_pe},   {"seed", g.seed}};
  }
  j["attention"] = a;
  j["symbol_count"] = symbol_count;
  std::vector<std::string> lc, gc, vs;
  for (const auto& t : lasa_combos) lc.push_back(t.str());
  for (const auto& t : gcr_combos) gc.push_back(t.str());
  for (const auto& v : variants) vs.push_back(v.str());
  j["lasa"] = {{"combos", lc}, {"thresholds", thresholds}};
  j["gcr"] = {{"combos", gc}, {"variants", vs}, {"heatmaps", export_heatmaps}};
  j["certainty_steps"] = certainty_steps;
  if (predictions) j["predictions"] = predictions->string();
  if (baseline_predictions) j["baseline_predictions"] = baseline_predictions->string();
  j["output_dir"] = output_dir.string();
  return j;
}

void ExperimentConfig::check_files() const {
  std::vector<fs::path> files;
  for (const auto& p : {dataset.train, dataset.validation, dataset.test, attention.bundle, predictions,
                        baseline_predictions}) {
    if (p) files.push_back(*p);
  }
  for (const auto& [split, path] : attention.bundles) files.push_back(path);
  for (const auto& f : files) {
    if (!fs::exists(f)) throw Error(ErrorCode::BadConfig, "referenced file does not exist: " + f.string());
  }
}

std::optional<std::size_t> Workspace::find(std::string_view sample_id) const {
  for (std::size_t i = 0; i < sample_ids.size(); ++i) {
    if (sample_ids[i] == sample_id) return i;
  }
  return std::nullopt;
}

RawDataset load_dataset_source(const DatasetSource& source) {
  if (source.fixture) return gen_fixture(source.fixture->kind, source.fixture->params, source.fixture->seed);
  if (!source.train || !source.test) throw Error(ErrorCode::BadConfig, "dataset needs train and test files");
  LabelledRows validation;
  if (source.validation) validation = read_series_file(*source.validation);
  return make_dataset(read_series_file(*source.train), read_series_file(*source.test), validation);
}

void symbolize(Workspace& ws, int symbol_count) {
  const auto train = ws.dataset.series_of(Split::Train);
  ws.codec = fit_codec(train, symbol_count);
  ws.symbolized = transform_all(ws.codec, ws.dataset.series, ws.dataset.labels);
}

namespace {

void check_alignment(const AttentionBundle& bundle, const RawDataset& ds, std::span<const std::size_t> rows,
                     const std::string& what) {
  if (bundle.manifest.sample_count != rows.size()) {
    throw Error(ErrorCode::BadBundle, what + " has " + std::to_string(bundle.manifest.sample_count) +
                                          " samples for " + std::to_string(rows.size()) + " dataset rows");
  }
  if (bundle.manifest.n != ds.length()) {
    throw Error(ErrorCode::BadBundle, what + " has n = " + std::to_string(bundle.manifest.n) +
                                          ", dataset length is " + std::to_string(ds.length()));
  }
  if (bundle.manifest.labels) {
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if ((*bundle.manifest.labels)[k] != ds.labels[rows[k]]) {
        throw Error(ErrorCode::BadBundle, what + ": label of sample " + bundle.manifest.sample_ids[k] +
                                              " differs from the dataset row");
      }
    }
  }
}

}  // namespace

void load_attention(Workspace& ws, const AttentionSource& source) {
  const auto& ds = ws.dataset;
  ws.stacks.assign(ds.size(), AttentionStack{});
  ws.sample_ids.assign(ds.size(), std::string{});

  if (!source.bundles.empty() || source.bundle) {
    std::vector<std::pair<AttentionBundle, std::vector<std::size_t>>> parts;
    if (source.bundle) {
      std::vector<std::size_t> all(ds.size());
      std::iota(all.begin(), all.end(), std::size_t{0});
      parts.emplace_back(read_bundle(*source.bundle), all);
      check_alignment(parts.back().first, ds, parts.back().second, source.bundle->string());
    } else {
      for (auto split : {Split::Train, Split::Validation, Split::Test}) {
        const auto rows = ds.rows(split);
        auto it = source.bundles.find(split);
        if (it == source.bundles.end()) {
          if (!rows.empty()) {
            throw Error(ErrorCode::BadConfig, "no attention bundle for the " + std::string(to_string(split)) + " split");
          }
          continue;
        }
        parts.emplace_back(read_bundle(it->second), rows);
        check_alignment(parts.back().first, ds, rows, it->second.string());
      }
    }
    std::size_t layers = 0, heads = 0;
    for (auto& [bundle, rows] : parts) {
      if (layers == 0) {
        layers = bundle.manifest.layers;
        heads = bundle.manifest.heads;
      } else if (bundle.manifest.layers != layers || bundle.manifest.heads != heads) {
        throw Error(ErrorCode::BadBundle, "bundles disagree on (L, H)");
      }
      for (std::size_t k = 0; k < rows.size(); ++k) {
        ws.sample_ids[rows[k]] = bundle.manifest.sample_ids[k];
        ws.stacks[rows[k]] = std::move(bundle.stacks[k]);
      }
    }
  } else {
    const auto spec = source.generate.value_or(GenerateSpec{});
    const auto weights = spec.weights == "random"
                             ? MhaWeights::random(spec.layers, spec.heads, spec.d_model, spec.d_k, spec.seed, spec.scale)
                             : MhaWeights::zeros(spec.layers, spec.heads, spec.d_model, spec.d_k);
    std::map<Split, std::size_t> next;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      ws.sample_ids[i] = std::string(to_string(ds.split[i])) + "-" + std::to_string(next[ds.split[i]]++);
      ws.stacks[i] = forward_attention(ws.symbolized.at(i), weights, spec.use_pe, ws.sample_ids[i]);
    }
  }
  std::set<std::string_view> unique(ws.sample_ids.begin(), ws.sample_ids.end());
  if (unique.size() != ws.sample_ids.size()) throw Error(ErrorCode::BadBundle, "sample ids are not unique across splits");
}

Workspace open_workspace(const ExperimentConfig& config) {
  config.check_files();
  Workspace ws;
  ws.dataset = load_dataset_source(config.dataset);
  symbolize(ws, config.symbol_count);
  load_attention(ws, config.attention);
  return ws;
}

}  // namespace saxattn
