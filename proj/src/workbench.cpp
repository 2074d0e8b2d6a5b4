#include "saxattn/workbench.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "saxattn/bundle.hpp"

namespace saxattn {

namespace fs = std::filesystem;
using nlohmann::json;

std::string model_key(const GcrVariant& variant, const ComboTag& combo) {
  return variant.str() + "@" + combo.str();
}

std::string threshold_slug(const ThresholdSpec& spec) {
  std::string out;
  for (char ch : spec.str()) {
    if (ch == '[' || ch == ',') {
      out.push_back('_');
    } else if (ch != ']') {
      out.push_back(ch);
    }
  }
  return out;
}

std::vector<Matrix> compute_lamas(const Workspace& ws, const ComboTag& combo) {
  const auto tag = combo.matrix_part();
  std::vector<Matrix> out;
  out.reserve(ws.stacks.size());
  for (const auto& stack : ws.stacks) out.push_back(aggregate_lama(stack, tag).matrix);
  return out;
}

GcrModel train_model(const Workspace& ws, std::span<const Matrix> lamas, const GcrVariant& variant,
                     const ComboTag& combo) {
  std::vector<SymbolizedSeries> train;
  std::vector<Matrix> train_lamas;
  for (auto i : ws.dataset.rows(Split::Train)) {
    train.push_back(ws.symbolized.at(i));
    train_lamas.push_back(lamas[i]);
  }
  auto model = build_gcr(train, train_lamas, variant, ws.codec.symbol_count);
  model.combo = combo.matrix_part().str();
  return model;
}

std::vector<CurvePoint> certainty_curve(std::span<const MembershipResult> results, std::span<const int> gold,
                                        std::span<const double> steps_percent) {
  std::vector<CurvePoint> curve{{100.0, certainty_filter(results, gold, 1.0)}};
  for (double p : steps_percent) {
    if (!(p > 0.0 && p <= 100.0)) throw Error(ErrorCode::BadFraction, "certainty steps are percentages in (0, 100]");
    if (p == 100.0) continue;
    curve.push_back({p, certainty_filter(results, gold, p / 100.0)});
  }
  return curve;
}

json to_json(std::span<const CurvePoint> curve) {
  json out = json::array();
  for (const auto& c : curve) out.push_back({{"percent", c.percent}, {"accuracy", c.accuracy}});
  return out;
}

std::string heatmap_document(const GcrModel& model, int label, std::span<const double> symbol_values) {
  return heatmap_json(model, label, symbol_values).dump(2) + "\n";
}

ComplexityReport abstraction_complexity(const Abstraction& a, std::size_t n) {
  const auto v = interpolate(a, n);
  const auto first = std::find(v.mask.begin(), v.mask.end(), true);
  if (first == v.mask.end()) return complexity_report({}, a.reduction);
  const auto begin = static_cast<std::size_t>(first - v.mask.begin());
  const auto end = n - static_cast<std::size_t>(std::find(v.mask.rbegin(), v.mask.rend(), true) - v.mask.rbegin());
  return complexity_report(std::span<const double>(v.values).subspan(begin, end - begin), a.reduction);
}

json aggregate_complexity(std::span<const ComplexityReport> reports) {
  auto summarize = [](const std::vector<double>& values) {
    if (values.empty()) return json{{"mean", nullptr}, {"std", nullptr}, {"count", 0}};
    const auto ms = mean_std(values);
    return json{{"mean", ms.mean}, {"std", ms.std}, {"count", values.size()}};
  };
  std::vector<double> ce, svden, apen, sampen, shifts, reduction;
  for (const auto& r : reports) {
    if (r.ce) ce.push_back(*r.ce);
    if (r.svden) svden.push_back(*r.svden);
    if (r.apen) apen.push_back(*r.apen);
    if (r.sampen) sampen.push_back(*r.sampen);
    if (r.trend_shifts) shifts.push_back(static_cast<double>(*r.trend_shifts));
    reduction.push_back(r.data_reduction);
  }
  return {{"ce", summarize(ce)},         {"svden", summarize(svden)},         {"apen", summarize(apen)},
          {"sampen", summarize(sampen)}, {"trend_shifts", summarize(shifts)}, {"data_reduction", summarize(reduction)}};
}

std::string_view to_string(StageState s) {
  switch (s) {
    case StageState::Ok: return "ok";
    case StageState::Failed: return "failed";
    case StageState::Skipped: return "skipped";
  }
  return "unknown";
}

bool PipelineResult::ok() const {
  return std::all_of(stages.begin(), stages.end(), [](const StageStatus& s) { return s.state == StageState::Ok; });
}

const StageStatus* PipelineResult::failed_stage() const {
  for (const auto& s : stages) {
    if (s.state == StageState::Failed) return &s;
  }
  return nullptr;
}

json PipelineResult::report() const {
  json st = json::array();
  for (const auto& s : stages) {
    json entry{{"name", s.name}, {"status", to_string(s.state)}};
    if (s.code) {
      entry["code"] = to_string(*s.code);
      entry["message"] = s.message;
    }
    st.push_back(entry);
  }
  return {{"version", kReportVersion}, {"ok", ok()}, {"stages", st}, {"files", files}};
}

namespace {

std::string num(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

class OutputDir {
 public:
  explicit OutputDir(fs::path root) : root_(std::move(root)) {}

  fs::path prepare(const std::string& rel) {
    const auto path = root_ / rel;
    fs::create_directories(path.parent_path());
    files_.insert(rel);
    return path;
  }

  void write(const std::string& rel, const std::string& content) {
    std::ofstream out(prepare(rel), std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + (root_ / rel).string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
  }

  void write_json(const std::string& rel, const json& j) { write(rel, j.dump(2) + "\n"); }

  std::vector<std::string> files() const { return {files_.begin(), files_.end()}; }

 private:
  fs::path root_;
  std::set<std::string> files_;
};

struct LasaOutcome {
  std::string combo;
  ThresholdSpec spec;
  std::vector<double> reductions;
  std::vector<ComplexityReport> complexity;
};

struct ModelOutcome {
  std::string key;
  std::string combo;
  std::string variant;
  std::vector<MembershipResult> results;
};

std::map<std::string, int> prediction_map(const fs::path& path, const Workspace& ws, std::span<const std::size_t> rows) {
  std::map<std::string, int> out;
  for (auto& p : read_predictions(path)) out[p.sample_id] = p.label;
  for (auto i : rows) {
    if (!out.contains(ws.sample_ids[i])) {
      throw Error(ErrorCode::BadDataset, path.string() + " has no prediction for test sample " + ws.sample_ids[i]);
    }
  }
  return out;
}

}  // namespace

PipelineResult run_pipeline(const ExperimentConfig& config) {
  if (config.output_dir.empty()) throw Error(ErrorCode::BadConfig, "output_dir is not set");
  OutputDir out(config.output_dir);
  PipelineResult result;

  auto stage = [&result](const char* name, bool ready, auto&& body) {
    StageStatus st;
    st.name = name;
    if (ready) {
      try {
        body();
        st.state = StageState::Ok;
      } catch (const Error& e) {
        st.state = StageState::Failed;
        st.code = e.code();
        st.message = e.what();
      } catch (const std::exception& e) {
        st.state = StageState::Failed;
        st.code = ErrorCode::Io;
        st.message = e.what();
      }
    }
    result.stages.push_back(st);
    return st.state == StageState::Ok;
  };

  auto normalized = config.to_json();
  normalized.erase("output_dir");
  out.write_json("config.json", normalized);

  Workspace ws;
  std::vector<std::size_t> test_rows;
  std::map<std::string, std::vector<Matrix>> lamas;
  std::vector<LasaOutcome> lasa;
  std::vector<ModelOutcome> models;

  const bool have_dataset = stage("dataset", true, [&] {
    config.check_files();
    ws.dataset = load_dataset_source(config.dataset);
    for (auto split : {Split::Train, Split::Validation, Split::Test}) {
      const auto rows = rows_of(ws.dataset, split);
      if (!rows.series.empty()) out.write("dataset/" + std::string(to_string(split)) + ".csv", format_series_text(rows));
    }
    test_rows = ws.dataset.rows(Split::Test);
  });

  const bool have_symbols = stage("symbolize", have_dataset, [&] {
    symbolize(ws, config.symbol_count);
    out.write_json("codec.json", json(ws.codec));
  });

  const bool have_attention = stage("attention", have_symbols, [&] {
    load_attention(ws, config.attention);
    for (const auto& s : ws.stacks) validate_stack(s);
    std::string ids = "sample_id,split,label\n";
    for (std::size_t i = 0; i < ws.dataset.size(); ++i) {
      ids += ws.sample_ids[i] + "," + std::string(to_string(ws.dataset.split[i])) + "," +
             std::to_string(ws.dataset.labels[i]) + "\n";
    }
    out.write("dataset/samples.csv", ids);
    if (config.attention.generate) {
      auto bundle = make_bundle(ws.stacks, ws.dataset.labels);
      write_bundle(out.prepare("attention/bundle.json"), bundle);
      out.prepare("attention/bundle.bin");
    }
  });

  const bool have_lamas = stage("aggregate", have_attention, [&] {
    std::vector<ComboTag> needed = config.gcr_combos;
    for (const auto& c : config.lasa_combos) needed.push_back(c.matrix_part());
    for (const auto& c : needed) {
      if (!lamas.contains(c.str())) lamas[c.str()] = compute_lamas(ws, c);
    }
    for (const auto& c : config.lasa_combos) {
      const auto& ms = lamas.at(c.matrix_part().str());
      std::string csv = "sample_id";
      for (std::size_t j = 0; j < ws.dataset.length(); ++j) csv += "," + std::to_string(j);
      csv += "\n";
      for (std::size_t i = 0; i < ms.size(); ++i) {
        const auto lava = aggregate_lava(Lama{ms[i], c.matrix_part(), ws.sample_ids[i]}, *c.step3);
        csv += ws.sample_ids[i];
        for (double v : lava.values) csv += "," + num(v);
        csv += "\n";
      }
      out.write("lava/" + c.str() + ".csv", csv);
    }
  });

  const bool have_lasa = stage("lasa", have_lamas, [&] {
    const auto n = ws.dataset.length();
    for (const auto& c : config.lasa_combos) {
      const auto& ms = lamas.at(c.matrix_part().str());
      std::vector<Lava> lavas;
      for (std::size_t i = 0; i < ms.size(); ++i) {
        lavas.push_back(aggregate_lava(Lama{ms[i], c.matrix_part(), ws.sample_ids[i]}, *c.step3));
      }
      for (const auto& spec : config.thresholds) {
        LasaOutcome o{c.str(), spec, {}, {}};
        std::string records;
        std::string csv = "sample_id,position,value,mask\n";
        for (std::size_t i = 0; i < lavas.size(); ++i) {
          const auto a = abstract_series(ws.symbolized[i], lavas[i], resolve_thresholds(lavas[i].values, spec));
          records += abstraction_record(a).dump() + "\n";
          const auto v = interpolate(a, n);
          for (std::size_t p = 0; p < n; ++p) {
            csv += ws.sample_ids[i] + "," + std::to_string(p) + "," + (v.mask[p] ? num(v.values[p]) : "") + "," +
                   (v.mask[p] ? "1" : "0") + "\n";
          }
          o.reductions.push_back(a.reduction);
          o.complexity.push_back(abstraction_complexity(a, n));
        }
        const auto dir = "lasa/" + c.str() + "/" + threshold_slug(spec) + "/";
        out.write(dir + "abstractions.jsonl", records);
        out.write(dir + "validation.csv", csv);
        lasa.push_back(std::move(o));
      }
    }
  });

  const bool have_models = stage("gcr", have_lamas, [&] {
    for (const auto& c : config.gcr_combos) {
      const auto& ms = lamas.at(c.str());
      for (const auto& variant : config.variants) {
        const auto model = train_model(ws, ms, variant, c);
        const auto dir = c.str() + "/" + variant.str();
        write_gcr_store(out.prepare("gcr/" + dir + ".json"), model, ws.codec.mapped_values);
        out.prepare("gcr/" + dir + ".bin");
        if (config.export_heatmaps) {
          for (int label : model.classes()) {
            out.write("heatmaps/" + dir + "/class_" + std::to_string(label) + ".json",
                      heatmap_document(model, label, ws.codec.mapped_values));
          }
        }
        ModelOutcome o{model_key(variant, c), c.str(), variant.str(), {}};
        for (auto i : test_rows) o.results.push_back(model.classify(ws.symbolized[i]));
        models.push_back(std::move(o));
      }
    }
  });

  std::vector<int> gold;
  json classification = json::array();
  const bool have_classes = stage("classify", have_models, [&] {
    if (test_rows.empty()) throw Error(ErrorCode::EmptyBatch, "the test split is empty");
    for (auto i : test_rows) gold.push_back(ws.dataset.labels[i]);
    for (const auto& m : models) {
      std::string csv = "sample_id,label,predicted,certainty,margin\n";
      for (std::size_t k = 0; k < test_rows.size(); ++k) {
        const auto& r = m.results[k];
        csv += ws.sample_ids[test_rows[k]] + "," + std::to_string(gold[k]) + "," + std::to_string(r.predicted) + "," +
               num(r.certainty) + "," + (r.margin ? num(*r.margin) : "") + "\n";
      }
      out.write("classification/" + m.combo + "/" + m.variant + ".csv", csv);
      const auto curve = certainty_curve(m.results, gold, config.certainty_steps);
      classification.push_back(
          {{"key", m.key}, {"combo", m.combo}, {"variant", m.variant}, {"accuracy", curve.front().accuracy},
           {"certainty_curve", to_json(curve)}});
    }
    out.write_json("classification/summary.json", {{"version", kReportVersion}, {"models", classification}});
  });

  stage("metrics", have_symbols, [&] {
    json metrics{{"version", kReportVersion}};
    std::vector<ComplexityReport> original;
    json original_samples = json::array();
    for (std::size_t i = 0; i < ws.symbolized.size(); ++i) {
      original.push_back(complexity_report(ws.symbolized[i].values, 0.0));
      auto entry = to_json(original.back());
      entry["sample_id"] = ws.sample_ids.empty() ? json(nullptr) : json(ws.sample_ids[i]);
      original_samples.push_back(entry);
    }
    metrics["original"] = {{"complexity", aggregate_complexity(original)}, {"samples", original_samples}};

    json lasa_json = json::array();
    if (have_lasa) {
      for (const auto& o : lasa) {
        json samples = json::array();
        for (std::size_t i = 0; i < o.complexity.size(); ++i) {
          auto entry = to_json(o.complexity[i]);
          entry["sample_id"] = ws.sample_ids[i];
          samples.push_back(entry);
        }
        const auto r = mean_std(o.reductions);
        lasa_json.push_back({{"combo", o.combo},
                             {"threshold", o.spec.str()},
                             {"reduction", {{"mean", r.mean}, {"std", r.std}}},
                             {"complexity", aggregate_complexity(o.complexity)},
                             {"samples", samples}});
      }
    }
    metrics["lasa"] = lasa_json;

    std::optional<double> baseline_accuracy;
    std::optional<std::map<std::string, int>> reference;
    if (have_classes && !gold.empty()) {
      auto accuracy_of = [&](const std::map<std::string, int>& preds) {
        std::size_t hit = 0;
        for (std::size_t k = 0; k < test_rows.size(); ++k) hit += preds.at(ws.sample_ids[test_rows[k]]) == gold[k];
        return static_cast<double>(hit) / static_cast<double>(test_rows.size());
      };
      if (config.predictions) {
        reference = prediction_map(*config.predictions, ws, test_rows);
        metrics["model"] = {{"accuracy", accuracy_of(*reference)}};
      }
      if (config.baseline_predictions) {
        baseline_accuracy = accuracy_of(prediction_map(*config.baseline_predictions, ws, test_rows));
        metrics["baseline"] = {{"accuracy", *baseline_accuracy}};
        if (reference) metrics["model"]["accuracy_delta"] = metrics["model"]["accuracy"].get<double>() - *baseline_accuracy;
      }
    }
    json gcr_json = json::array();
    if (have_classes) {
      for (std::size_t m = 0; m < models.size(); ++m) {
        auto entry = classification[m];
        if (reference) {
          std::vector<int> ours, theirs;
          for (std::size_t k = 0; k < test_rows.size(); ++k) {
            ours.push_back(models[m].results[k].predicted);
            theirs.push_back(reference->at(ws.sample_ids[test_rows[k]]));
          }
          entry["fidelity"] = model_fidelity(ours, theirs);
        }
        if (baseline_accuracy) entry["accuracy_delta"] = entry["accuracy"].get<double>() - *baseline_accuracy;
        gcr_json.push_back(entry);
      }
    }
    metrics["gcr"] = gcr_json;
    out.write_json("metrics.json", metrics);
  });

  result.files = out.files();
  out.write_json("report.json", result.report());
  return result;
}

}  // namespace saxattn
