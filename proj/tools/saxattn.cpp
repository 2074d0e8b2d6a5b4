#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "saxattn/bundle.hpp"
#include "saxattn/config.hpp"
#include "saxattn/error.hpp"
#include "saxattn/fixtures.hpp"
#include "saxattn/metrics.hpp"
#include "saxattn/service.hpp"
#include "saxattn/workbench.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace saxattn;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Writes to `path`, or stdout when it is empty or "-".
void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << content;
}

SaxCodec read_codec(const fs::path& path) {
  try {
    return json::parse(slurp(path)).get<SaxCodec>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadConfig, path.string() + ": " + e.what());
  }
}

std::vector<std::size_t> select_rows(const Workspace& ws, const std::vector<std::string>& ids, const std::string& split) {
  if (!ids.empty()) {
    std::vector<std::size_t> out;
    for (const auto& id : ids) {
      auto row = ws.find(id);
      if (!row) throw Error(ErrorCode::BadParams, "unknown sample '" + id + "'");
      out.push_back(*row);
    }
    return out;
  }
  if (split.empty()) {
    std::vector<std::size_t> all(ws.dataset.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  for (auto s : {Split::Train, Split::Validation, Split::Test}) {
    if (split == to_string(s)) return ws.dataset.rows(s);
  }
  throw Error(ErrorCode::BadParams, "unknown split '" + split + "'");
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

Service* running_service = nullptr;

void on_signal(int) {
  if (running_service) running_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention-based abstraction and coherence workbench for symbolized time series"};
  app.require_subcommand(1);

  // sax
  auto* sax = app.add_subcommand("sax", "Symbolization");
  sax->require_subcommand(1);
  std::string sax_train, sax_out, sax_codec, sax_input;
  int sax_symbols = 3;
  bool sax_indices = false;
  auto* sax_fit = sax->add_subcommand("fit", "Fit a codec on train rows");
  sax_fit->add_option("--train", sax_train, "Train series file")->required()->check(CLI::ExistingFile);
  sax_fit->add_option("-s,--symbols", sax_symbols, "Alphabet size")->capture_default_str();
  sax_fit->add_option("-o,--out", sax_out, "Codec JSON (default stdout)");
  auto* sax_transform = sax->add_subcommand("transform", "Symbolize series with a fitted codec");
  sax_transform->add_option("--codec", sax_codec, "Codec JSON")->required()->check(CLI::ExistingFile);
  sax_transform->add_option("--input", sax_input, "Series file")->required()->check(CLI::ExistingFile);
  sax_transform->add_option("-o,--out", sax_out, "Output file (default stdout)");
  sax_transform->add_flag("--indices", sax_indices, "Write symbol indices instead of mapped values");

  // attn
  auto* attn = app.add_subcommand("attn", "Attention bundles");
  attn->require_subcommand(1);
  GenerateSpec gen;
  std::string attn_input, attn_codec, attn_out, attn_bundle, attn_prefix = "sample", attn_dataset;
  double attn_tolerance = kIngestRowSumTolerance;
  auto* attn_gen = attn->add_subcommand("gen", "Run a fixed-weight attention pass and write a bundle");
  attn_gen->add_option("--input", attn_input, "Series file")->required()->check(CLI::ExistingFile);
  attn_gen->add_option("--codec", attn_codec, "Codec JSON")->required()->check(CLI::ExistingFile);
  attn_gen->add_option("-o,--out", attn_out, "Manifest path; the payload goes next to it")->required();
  attn_gen->add_option("--layers", gen.layers)->capture_default_str();
  attn_gen->add_option("--heads", gen.heads)->capture_default_str();
  attn_gen->add_option("--d-model", gen.d_model)->capture_default_str();
  attn_gen->add_option("--d-k", gen.d_k)->capture_default_str();
  attn_gen->add_option("--weights", gen.weights)->check(CLI::IsMember({"zero", "random"}))->capture_default_str();
  attn_gen->add_option("--scale", gen.scale)->capture_default_str();
  attn_gen->add_option("--seed", gen.seed)->capture_default_str();
  attn_gen->add_flag("--pe", gen.use_pe, "Add positional encoding");
  attn_gen->add_option("--prefix", attn_prefix, "Sample id prefix")->capture_default_str();
  auto* attn_validate = attn->add_subcommand("validate", "Check a bundle (and optionally its dataset)");
  attn_validate->add_option("bundle", attn_bundle, "Manifest path")->required()->check(CLI::ExistingFile);
  attn_validate->add_option("--dataset", attn_dataset, "Series file the bundle must line up with")
      ->check(CLI::ExistingFile);
  attn_validate->add_option("--tolerance", attn_tolerance, "Row-sum tolerance")->capture_default_str();

  // workspace-based commands
  std::string config_path, combo_text, threshold_text = "avg[1,1.2]", split, out_path, variant_text;
  std::vector<std::string> sample_ids;
  auto* lama = app.add_subcommand("lama", "Aggregate attention into LAMAs (or LAVAs with a three-step combo)");
  lama->add_option("-c,--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
  lama->add_option("--combo", combo_text, "e.g. hl-ms or hl-msm")->required();
  lama->add_option("--sample", sample_ids, "Sample ids (default all)");
  lama->add_option("--split", split, "train, validation or test");
  lama->add_option("-o,--out", out_path, "JSON lines output (default stdout)");

  auto* lasa = app.add_subcommand("lasa", "Abstract samples with attention thresholds");
  lasa->add_option("-c,--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
  lasa->add_option("--combo", combo_text, "LAVA combo, e.g. hl-msm")->required();
  lasa->add_option("--threshold", threshold_text, "e.g. avg[1,1.2] or max[1.8,-1]")->capture_default_str();
  lasa->add_option("--sample", sample_ids, "Sample ids (default all)");
  lasa->add_option("--split", split, "train, validation or test");
  lasa->add_option("-o,--out", out_path, "JSON lines output (default stdout)");

  auto* gcr = app.add_subcommand("gcr", "Global coherence representations");
  gcr->require_subcommand(1);
  std::string store_path, heatmap_dir;
  int heatmap_class = 0;
  auto* gcr_build = gcr->add_subcommand("build", "Build one model on the train split and store it");
  gcr_build->add_option("-c,--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
  gcr_build->add_option("--combo", combo_text, "LAMA combo")->default_val("hl-ss");
  gcr_build->add_option("--variant", variant_text, "e.g. fcam-sum, gtm_avg-ravg-t1.3")->required();
  gcr_build->add_option("-o,--out", store_path, "Store manifest path")->required();
  gcr_build->add_option("--heatmaps", heatmap_dir, "Also write one heatmap per class here");
  auto* gcr_classify = gcr->add_subcommand("classify", "Classify samples with a stored model");
  gcr_classify->add_option("--store", store_path, "Store manifest")->required()->check(CLI::ExistingFile);
  gcr_classify->add_option("-c,--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
  gcr_classify->add_option("--sample", sample_ids, "Sample ids");
  gcr_classify->add_option("--split", split, "Split (default test)");
  gcr_classify->add_option("-o,--out", out_path, "JSON output (default stdout)");
  auto* gcr_export = gcr->add_subcommand("export", "Write the heatmap of one class of a stored model");
  gcr_export->add_option("--store", store_path, "Store manifest")->required()->check(CLI::ExistingFile);
  gcr_export->add_option("--class", heatmap_class, "Class label")->required();
  gcr_export->add_option("-o,--out", out_path, "Heatmap JSON (default stdout)");

  auto* metrics = app.add_subcommand("metrics", "Complexity of series, or fidelity of two prediction files");
  std::string metrics_input, pred_a, pred_b;
  metrics->add_option("--input", metrics_input, "Series file; one complexity report per row")
      ->check(CLI::ExistingFile);
  metrics->add_option("--predictions", pred_a, "Predictions CSV")->check(CLI::ExistingFile);
  metrics->add_option("--against", pred_b, "Second predictions CSV")->check(CLI::ExistingFile);
  metrics->add_option("-o,--out", out_path, "Output (default stdout)");

  auto* pipeline = app.add_subcommand("pipeline", "Batch pipeline");
  pipeline->require_subcommand(1);
  std::string pipeline_out;
  auto* pipeline_run = pipeline->add_subcommand("run", "Run every stage and write the report bundle");
  pipeline_run->add_option("-c,--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
  pipeline_run->add_option("-o,--out", pipeline_out, "Output directory (overrides the config)");

  auto* fixture = app.add_subcommand("fixture", "Synthetic datasets");
  fixture->require_subcommand(1);
  std::string fixture_kind = "trend", fixture_params = "{}", fixture_out;
  std::uint64_t fixture_seed = 0;
  auto* fixture_gen = fixture->add_subcommand("gen", "Write train/validation/test files");
  fixture_gen->add_option("--kind", fixture_kind)->check(CLI::IsMember({"trend", "counting", "counting-binary"}))
      ->capture_default_str();
  fixture_gen->add_option("--params", fixture_params, "JSON overrides")->capture_default_str();
  fixture_gen->add_option("--seed", fixture_seed)->capture_default_str();
  fixture_gen->add_option("-o,--out", fixture_out, "Output directory")->required();

  auto* serve = app.add_subcommand("serve", "HTTP service");
  ServiceOptions service_options;
  std::string serve_config;
  serve->add_option("--host", service_options.host)->capture_default_str();
  serve->add_option("--port", service_options.port, "0 picks a free port")->capture_default_str();
  serve->add_option("--upload-dir", service_options.upload_dir)->capture_default_str();
  serve->add_option("-c,--config", serve_config, "Open a session from this config at startup")
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sax_fit) {
      const auto rows = read_series_file(sax_train);
      emit(sax_out, json(fit_codec(rows.series, sax_symbols)).dump(2) + "\n");
    } else if (*sax_transform) {
      const auto codec = read_codec(sax_codec);
      const auto rows = read_series_file(sax_input);
      LabelledRows mapped{rows.labels, {}};
      for (std::size_t i = 0; i < rows.series.size(); ++i) {
        const auto x = transform(codec, rows.series[i], rows.labels[i]);
        mapped.series.emplace_back(x.values);
        if (sax_indices) mapped.series.back().assign(x.symbols.begin(), x.symbols.end());
      }
      emit(sax_out, format_series_text(mapped));
    } else if (*attn_gen) {
      const auto codec = read_codec(attn_codec);
      const auto rows = read_series_file(attn_input);
      const auto weights = gen.weights == "random"
                               ? MhaWeights::random(gen.layers, gen.heads, gen.d_model, gen.d_k, gen.seed, gen.scale)
                               : MhaWeights::zeros(gen.layers, gen.heads, gen.d_model, gen.d_k);
      std::vector<AttentionStack> stacks;
      for (std::size_t i = 0; i < rows.series.size(); ++i) {
        const auto x = transform(codec, rows.series[i], rows.labels[i]);
        stacks.push_back(forward_attention(x, weights, gen.use_pe, attn_prefix + "-" + std::to_string(i)));
      }
      auto bundle = make_bundle(std::move(stacks), rows.labels);
      const fs::path out(attn_out);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      write_bundle(out, bundle);
      std::cout << "wrote " << bundle.manifest.sample_count << " samples to " << attn_out << "\n";
    } else if (*attn_validate) {
      auto bundle = read_bundle(attn_bundle, false);
      for (const auto& s : bundle.stacks) validate_stack(s, attn_tolerance);
      if (!attn_dataset.empty()) {
        const auto rows = read_series_file(attn_dataset);
        if (rows.series.size() != bundle.manifest.sample_count) {
          throw Error(ErrorCode::BadBundle, "bundle has " + std::to_string(bundle.manifest.sample_count) +
                                                " samples, dataset has " + std::to_string(rows.series.size()));
        }
        if (!rows.series.empty() && rows.series.front().size() != bundle.manifest.n) {
          throw Error(ErrorCode::BadBundle, "bundle n differs from the dataset length");
        }
      }
      const auto& m = bundle.manifest;
      std::cout << "ok: " << m.sample_count << " samples, L=" << m.layers << " H=" << m.heads << " n=" << m.n << "\n";
    } else if (*lama) {
      const auto ws = open_workspace(load_config(config_path));
      const auto combo = ComboTag::parse(combo_text);
      std::string lines;
      for (auto row : select_rows(ws, sample_ids, split)) {
        const auto l = aggregate_lama(ws.stacks[row], combo.matrix_part());
        json record{{"sample_id", ws.sample_ids[row]}, {"combo", combo.str()}};
        if (combo.step3) {
          record["values"] = aggregate_lava(l, *combo.step3).values;
        } else {
          record["matrix"] = matrix_json(l.matrix);
        }
        lines += record.dump() + "\n";
      }
      emit(out_path, lines);
    } else if (*lasa) {
      const auto ws = open_workspace(load_config(config_path));
      const auto combo = ComboTag::parse(combo_text);
      if (!combo.step3) throw Error(ErrorCode::BadCombo, "lasa needs a LAVA combo such as hl-msm");
      const auto spec = ThresholdSpec::parse(threshold_text);
      std::string lines;
      for (auto row : select_rows(ws, sample_ids, split)) {
        const auto lava = aggregate_lava(ws.stacks[row], combo);
        const auto a = abstract_series(ws.symbolized[row], lava, resolve_thresholds(lava.values, spec));
        auto record = abstraction_record(a);
        record["complexity"] = to_json(abstraction_complexity(a, ws.dataset.length()));
        lines += record.dump() + "\n";
      }
      emit(out_path, lines);
    } else if (*gcr_build) {
      const auto ws = open_workspace(load_config(config_path));
      const auto combo = ComboTag::parse(combo_text).matrix_part();
      const auto variant = GcrVariant::parse(variant_text);
      const auto model = train_model(ws, compute_lamas(ws, combo), variant, combo);
      const fs::path out(store_path);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      write_gcr_store(out, model, ws.codec.mapped_values);
      if (!heatmap_dir.empty()) {
        fs::create_directories(heatmap_dir);
        for (int label : model.classes()) {
          emit((fs::path(heatmap_dir) / ("class_" + std::to_string(label) + ".json")).string(),
               heatmap_document(model, label, ws.codec.mapped_values));
        }
      }
      std::cout << "wrote " << model_key(variant, combo) << " to " << store_path << "\n";
    } else if (*gcr_classify) {
      const auto model = read_gcr_store(store_path);
      const auto ws = open_workspace(load_config(config_path));
      json results = json::array();
      std::size_t hits = 0;
      const auto rows = select_rows(ws, sample_ids, split.empty() && sample_ids.empty() ? "test" : split);
      if (rows.empty()) throw Error(ErrorCode::EmptyBatch, "no samples to classify");
      for (auto row : rows) {
        const auto r = model.classify(ws.symbolized[row]);
        auto entry = membership_json(model, r);
        entry["sample_id"] = ws.sample_ids[row];
        entry["label"] = ws.dataset.labels[row];
        hits += r.predicted == ws.dataset.labels[row];
        results.push_back(entry);
      }
      emit(out_path, json{{"accuracy", static_cast<double>(hits) / static_cast<double>(rows.size())},
                          {"results", results}}
                         .dump(2) +
                         "\n");
    } else if (*gcr_export) {
      const auto model = read_gcr_store(store_path);
      const auto manifest = json::parse(slurp(store_path));
      const auto values = manifest.at("vocabulary").get<std::vector<double>>();
      emit(out_path, heatmap_document(model, heatmap_class, values));
    } else if (*metrics) {
      if (!metrics_input.empty()) {
        std::string lines;
        for (const auto& x : read_series_file(metrics_input).series) {
          lines += to_json(complexity_report(x, 0.0)).dump() + "\n";
        }
        emit(out_path, lines);
      } else if (!pred_a.empty() && !pred_b.empty()) {
        const auto a = read_predictions(pred_a);
        std::map<std::string, int> b;
        for (const auto& p : read_predictions(pred_b)) b[p.sample_id] = p.label;
        std::vector<int> left, right;
        for (const auto& p : a) {
          auto it = b.find(p.sample_id);
          if (it == b.end()) throw Error(ErrorCode::LengthMismatch, "no prediction for " + p.sample_id + " in " + pred_b);
          left.push_back(p.label);
          right.push_back(it->second);
        }
        if (left.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "prediction files cover different samples");
        emit(out_path, json{{"fidelity", model_fidelity(left, right)}, {"samples", left.size()}}.dump(2) + "\n");
      } else {
        throw Error(ErrorCode::BadParams, "give --input, or --predictions with --against");
      }
    } else if (*pipeline_run) {
      auto config = load_config(config_path);
      if (!pipeline_out.empty()) config.output_dir = pipeline_out;
      const auto result = run_pipeline(config);
      for (const auto& s : result.stages) {
        std::cout << s.name << ": " << to_string(s.state);
        if (s.code) std::cout << " (" << s.message << ")";
        std::cout << "\n";
      }
      return result.ok() ? 0 : 1;
    } else if (*fixture_gen) {
      const auto ds = gen_fixture(fixture_kind, json::parse(fixture_params), fixture_seed);
      fs::create_directories(fixture_out);
      for (auto s : {Split::Train, Split::Validation, Split::Test}) {
        const auto rows = rows_of(ds, s);
        if (rows.series.empty()) continue;
        const auto path = fs::path(fixture_out) / (std::string(to_string(s)) + ".csv");
        write_series_file(path, rows);
        std::cout << path.string() << ": " << rows.series.size() << " rows\n";
      }
    } else if (*serve) {
      Service service(service_options);
      if (!serve_config.empty()) {
        std::cout << "session " << service.create_session(load_config(serve_config)) << "\n";
      }
      const int port = service.bind();
      std::cout << "listening on " << service_options.host << ":" << port << std::endl;
      running_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      service.listen();
      running_service = nullptr;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
