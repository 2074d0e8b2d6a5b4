// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [path to the saxattn CLI]

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gcr_instances.hpp"
#include "oracles.hpp"
#include "saxattn/attention.hpp"
#include "saxattn/error.hpp"
#include "saxattn/fixtures.hpp"
#include "saxattn/gcr.hpp"
#include "saxattn/lasa.hpp"
#include "saxattn/metrics.hpp"
#include "saxattn/workbench.hpp"
#include "temp_dir.hpp"

using namespace saxattn;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Collects the first few mismatches of one criterion.
class Failures {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (count_++ < 3) detail_ << (count_ > 1 ? "; " : "") << what;
  }
  bool ok() const { return count_ == 0; }
  std::string str() const { return detail_.str() + (count_ > 3 ? " (+" + std::to_string(count_ - 3) + " more)" : ""); }

 private:
  std::size_t count_ = 0;
  std::ostringstream detail_;
};

std::string num(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

void aggregation_oracle(Failures& f) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto L = 1 + rng() % 3, H = 1 + rng() % 3, n = 1 + rng() % 6;
    const auto stack = oracle::random_stack(rng, L, H, n);
    for (const auto& combo : all_matrix_combos()) {
      const auto lama = aggregate_lama(stack, combo);
      const auto ref = oracle::lama(stack, combo);
      f.expect(lama.matrix == ref, "LAMA " + combo.str() + " differs in trial " + std::to_string(trial));
      for (auto step3 : {Reduce::Max, Reduce::Sum}) {
        auto tag = combo;
        tag.step3 = step3;
        f.expect(aggregate_lava(stack, tag).values == oracle::lava(ref, step3 == Reduce::Max),
                 "LAVA " + tag.str() + " differs in trial " + std::to_string(trial));
      }
    }
    for (auto s : {Reduce::Max, Reduce::Sum}) {
      const auto hl = aggregate_lama(stack, {AxisOrder::HeadsThenLayers, s, s, std::nullopt}).matrix;
      const auto lh = aggregate_lama(stack, {AxisOrder::LayersThenHeads, s, s, std::nullopt}).matrix;
      f.expect(hl == lh, "hl/lh differ for a pure combo in trial " + std::to_string(trial));
    }
  }
}

void attention_math(Failures& f) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = 1 + rng() % 8, dk = 1 + rng() % 8;
    Matrix q(n, dk), k(n, dk);
    for (auto& v : q.values()) v = g(rng);
    for (auto& v : k.values()) v = g(rng);
    const auto a = attention_matrix(q, k);
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (double v : a.row(i)) {
        sum += v;
        f.expect(v >= 0.0 && v <= 1.0, "entry outside [0, 1]");
      }
      f.expect(std::abs(sum - 1.0) <= 1e-6, "row sum " + num(sum));
    }
    const auto uniform = attention_matrix(Matrix(n, dk), k);
    for (double v : uniform.values()) f.expect(v == 1.0 / static_cast<double>(n), "zero logits not uniform");
  }
  SymbolizedSeries x;
  x.values = {-1, 0, 1, 0, -1};
  x.symbols = {0, 1, 2, 1, 0};
  const auto stack = forward_attention(x, MhaWeights::zeros(2, 3, 4, 2), true);
  for (double v : stack.values()) f.expect(v == 0.2, "zero-weight forward pass not uniform");
}

void lasa_examples(Failures& f) {
  SymbolizedSeries x;
  x.values = {-1, 0, 1, 0.5};
  x.symbols = {0, 1, 2, 1};
  const std::vector<double> lava{0.1, 0.2, 0.3, 0.4};
  const auto a = abstract_series(x, lava, resolve_thresholds(lava, {ThresholdMode::Average, 1.0, 1.2}));
  f.expect(a.kept.size() == 2 && a.kept[0].position == 2 && a.kept[1].position == 3, "kept positions are not {2,3}");
  f.expect(a.reduction == 0.5, "reduction " + num(a.reduction));

  constexpr double inf = std::numeric_limits<double>::infinity();
  f.expect(abstract_series(x, lava, {-inf, -inf}).reduction == 0.0, "keep-all thresholds do not give reduction 0");
  f.expect(abstract_series(x, lava, {inf, inf}).reduction == 1.0, "drop-all thresholds do not give reduction 1");
  f.expect(abstract_series(x, lava, resolve_thresholds(lava, {ThresholdMode::Maximum, 1e9, 1e9})).reduction == 0.0,
           "tiny thresholds do not give reduction 0");
  f.expect(abstract_series(x, lava, resolve_thresholds(lava, {ThresholdMode::Maximum, 1.0, 1.0})).reduction == 1.0,
           "thresholds at the maximum do not give reduction 1");

  const double t1 = 0.5, t2 = 0.2;
  const std::vector<double> levels{0.1, t2, 0.3, t1, 0.8};
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> value(-3, 3);
  std::size_t cases = 0;
  for (std::size_t n = 1; n <= 8; ++n) {
    std::size_t total = 1;
    for (std::size_t k = 0; k < n; ++k) total *= levels.size();
    for (std::size_t code = 0; code < total; ++code) {
      SymbolizedSeries s;
      std::vector<double> l(n);
      std::size_t c = code;
      for (std::size_t k = 0; k < n; ++k) {
        l[k] = levels[c % levels.size()];
        c /= levels.size();
        s.values.push_back(value(rng));
        s.symbols.push_back(0);
      }
      const auto got = abstract_series(s, l, {t1, t2});
      const auto ref = oracle::lasa(s.values, l, t1, t2);
      bool same = got.kept.size() == ref.size();
      for (std::size_t k = 0; same && k < ref.size(); ++k) {
        same = got.kept[k].position == ref[k].position && got.kept[k].value == ref[k].value;
      }
      f.expect(same, "n=" + std::to_string(n) + " pattern " + std::to_string(code) + " differs from the reference");
      ++cases;
    }
  }
  f.expect(cases == 488280, "enumerated " + std::to_string(cases) + " patterns");
}

void complexity_suite(Failures& f) {
  const std::vector<double> constant(30, 0.7);
  const auto r = complexity_report(constant, 0.0);
  f.expect(r.ce == 0.0, "CE of a constant");
  f.expect(r.svden == 0.0, "SvdEn of a constant");
  f.expect(r.apen == 0.0, "ApEn of a constant");
  f.expect(r.sampen == 0.0, "SampEn of a constant");
  f.expect(r.trend_shifts == 0u, "trend shifts of a constant");
  std::vector<double> line(40);
  for (std::size_t i = 0; i < line.size(); ++i) line[i] = 0.3 + 0.05 * static_cast<double>(i);
  f.expect(trend_shifts(line, kTrendShiftTolerance) == 0, "trend shifts of a line");

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(5 + rng() % 36);
    for (auto& v : x) v = u(rng);
    const double tol = default_entropy_tolerance(x);
    const double ap = approximate_entropy(x, kEntropyOrder, tol);
    const double ap_ref = oracle::apen(x, kEntropyOrder, tol);
    f.expect(std::abs(ap - ap_ref) <= 1e-9, "ApEn " + num(ap) + " vs " + num(ap_ref));
    const auto se = try_sample_entropy(x, kEntropyOrder, tol);
    const double se_ref = oracle::sampen(x, kEntropyOrder, tol);
    if (std::isfinite(se_ref)) {
      f.expect(se && std::abs(*se - se_ref) <= 1e-9, "SampEn differs from the reference");
    } else {
      f.expect(!se, "SampEn defined where the reference is not");
    }
  }
}

void gcr_correctness(Failures& f) {
  using namespace gcr_instances;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 60; ++trial) {
    const auto in = random_instance(rng);
    const auto S = static_cast<std::size_t>(in.S);
    for (const auto& v : oracle_variants()) {
      const auto model = build_gcr(in.train, in.lamas, v, in.S, in.classes);
      const auto expect = oracle::gcr_scores(in.train, in.lamas, v, S, in.classes, in.inputs);
      for (std::size_t k = 0; k < in.inputs.size(); ++k) {
        const auto r = model.classify(in.inputs[k]);
        for (std::size_t c = 0; c < in.classes.size(); ++c) {
          f.expect(r.scores[c] == expect[k][c], v.str() + " differs from the oracle");
          if (v.penalty != PenaltyMode::None) continue;
          if (model.max_scores()[c] > 0.0) {
            f.expect(r.scores[c] >= 0.0 && r.scores[c] <= 1.0, v.str() + " score " + num(r.scores[c]));
          } else {
            f.expect(r.scores[c] == -std::numeric_limits<double>::infinity(), v.str() + " empty class not -inf");
          }
        }
      }
    }
    for (auto gsa : {SymbolAggregation::Sum, SymbolAggregation::RelativeAverage}) {
      const auto ccam = build_gcr(in.train, in.lamas, {.shape = GcrShape::Ccam, .gsa = gsa}, in.S, in.classes);
      const auto gtm = build_gcr(
          in.train, in.lamas, {.shape = GcrShape::Gtm, .gva = VectorAggregation::Average, .gsa = gsa}, in.S, in.classes);
      for (const auto& x : in.inputs) f.expect(ccam.classify(x).scores == gtm.classify(x).scores, "CCAM != avg GTM");
    }
    for (double lambda : {4.0, 0.125, 0.37, 13.0}) {
      auto scaled = in.lamas;
      for (auto& m : scaled) {
        for (auto& v : m.values()) v *= lambda;
      }
      const bool exact = std::exp2(std::round(std::log2(lambda))) == lambda;
      for (const auto& v : oracle_variants()) {
        if (v.penalty != PenaltyMode::None) continue;
        const auto a = build_gcr(in.train, in.lamas, v, in.S, in.classes);
        const auto b = build_gcr(in.train, scaled, v, in.S, in.classes);
        for (const auto& x : in.inputs) {
          const auto ra = a.classify(x), rb = b.classify(x);
          for (std::size_t c = 0; c < ra.scores.size(); ++c) {
            const bool same = exact || !std::isfinite(ra.scores[c])
                                  ? ra.scores[c] == rb.scores[c]
                                  : std::abs(ra.scores[c] - rb.scores[c]) <= 1e-12 * std::abs(ra.scores[c]);
            f.expect(same, v.str() + " changes under rescaling by " + num(lambda));
          }
        }
      }
    }
    for (auto v : oracle_variants()) {
      if (v.penalty != PenaltyMode::None || v.threshold_factor) continue;
      const auto plain = build_gcr(in.train, in.lamas, v, in.S, in.classes);
      v.threshold_factor = 0.0;
      const auto zero = build_gcr(in.train, in.lamas, v, in.S, in.classes);
      const auto p = plain.shape_tensor(), z = zero.shape_tensor();
      f.expect(std::equal(p.begin(), p.end(), z.begin(), z.end()), v.str() + " tensor changes at threshold 0");
      for (const auto& x : in.inputs) f.expect(plain.classify(x).scores == zero.classify(x).scores, "t0 scores differ");
    }
  }
}

void gcr_end_to_end(Failures& f) {
  ExperimentConfig config = parse_config(json{{"dataset", {{"fixture", {{"kind", "trend"}, {"seed", 17}}}}},
                                              {"attention", {{"generate", {{"weights", "zero"}}}}}});
  const auto ws = open_workspace(config);
  const auto n = ws.dataset.length();
  const auto S = static_cast<std::size_t>(ws.codec.symbol_count);
  const auto combo = ComboTag::parse("hl-ss");
  const auto lamas = compute_lamas(ws, combo);
  for (const auto& m : lamas) {
    for (double v : m.values()) f.expect(v == 1.0 / static_cast<double>(n), "LAMA not uniform");
  }
  const auto model = train_model(ws, lamas, GcrVariant::parse("gtm_avg-sum"), combo);
  std::vector<double> counts(model.classes().size() * S * n, 0.0);
  for (auto row : ws.dataset.rows(Split::Train)) {
    const auto c = model.class_index(ws.dataset.labels[row]);
    for (std::size_t j = 0; j < n; ++j) {
      counts[(c * S + static_cast<std::size_t>(ws.symbolized[row].symbols[j])) * n + j] += 1.0;
    }
  }
  for (std::size_t c = 0; c < model.classes().size(); ++c) {
    for (std::size_t v = 0; v < S; ++v) {
      for (std::size_t j = 0; j < n; ++j) {
        const double expected = counts[(c * S + v) * n + j];
        const double got = model.gtm(c, static_cast<int>(v), j) * static_cast<double>(n);
        f.expect(std::abs(got - expected) <= 1e-9, "GTM*n " + num(got) + " vs count " + num(expected));
      }
    }
  }
  std::size_t hits = 0;
  const auto test = ws.dataset.rows(Split::Test);
  for (auto row : test) hits += model.classify(ws.symbolized[row]).predicted == ws.dataset.labels[row];
  const double accuracy = static_cast<double>(hits) / static_cast<double>(test.size());
  f.expect(accuracy >= 0.9, "held-out accuracy " + num(accuracy));
}

void counting_fixture(Failures& f) {
  const auto ds = gen_fixture("counting", json::object(), 0);
  f.expect(ds.size() == 1024, "sequences: " + std::to_string(ds.size()));
  f.expect(ds.classes().size() == 11, "classes: " + std::to_string(ds.classes().size()));
  f.expect(ds.rows(Split::Train).size() == 308, "train: " + std::to_string(ds.rows(Split::Train).size()));
  f.expect(ds.rows(Split::Validation).size() == 204, "validation: " + std::to_string(ds.rows(Split::Validation).size()));
  f.expect(ds.rows(Split::Test).size() == 512, "test: " + std::to_string(ds.rows(Split::Test).size()));
  f.expect(std::set<std::vector<double>>(ds.series.begin(), ds.series.end()).size() == 1024, "duplicate sequences");
  f.expect(gen_fixture("counting-binary", json::object(), 0).classes() == std::vector<int>{0, 1}, "binary classes");
}

void metrics_axioms(Failures& f) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  auto random_matrix = [&](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (auto& v : m.values()) v = u(rng);
    return m;
  };
  for (int trial = 0; trial < 500; ++trial) {
    const auto r = 1 + rng() % 6, c = 1 + rng() % 6;
    const auto a = random_matrix(r, c), b = random_matrix(r, c), z = random_matrix(r, c);
    const double ab = matrix_distance(a, b), ba = matrix_distance(b, a);
    f.expect(matrix_distance(a, a) == 0.0, "d(a, a) != 0");
    f.expect(ab > 0.0, "d(a, b) not positive for distinct matrices");
    f.expect(ab == ba, "d not symmetric");
    const double az = matrix_distance(a, z), zb = matrix_distance(z, b);
    f.expect(ab <= (az + zb) * (1.0 + 1e-15), "triangle inequality");
  }
  const std::vector<int> p{0, 1, 2, 1, 0};
  f.expect(model_fidelity(p, p) == 1.0, "fidelity(a, a) != 1");

  std::vector<FoldSample> fold;
  for (int k = 0; k < 9; ++k) fold.push_back({"s" + std::to_string(k), k % 3, random_matrix(4, 4)});
  const std::vector<std::vector<FoldSample>> folds{fold, fold, fold};
  const auto report = consistency(folds);
  f.expect(report.outer_distance.mean == 0.0 && report.outer_distance.std == 0.0, "outer distance of identical folds");
}

void certainty_contract(Failures& f) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<MembershipResult> results(1 + rng() % 40);
    std::vector<int> gold;
    std::size_t hits = 0;
    for (auto& r : results) {
      r.certainty = u(rng);
      r.predicted = static_cast<int>(rng() % 3);
      gold.push_back(static_cast<int>(rng() % 3));
      hits += r.predicted == gold.back();
    }
    const double plain = static_cast<double>(hits) / static_cast<double>(results.size());
    f.expect(certainty_filter(results, gold, 1.0) == plain, "p = 1 differs from accuracy");
  }
  // 50 predictions: the 10 most certain are right, the rest alternate.
  std::vector<MembershipResult> results(50);
  std::vector<int> gold(50, 1);
  for (std::size_t i = 0; i < results.size(); ++i) {
    results[i].certainty = static_cast<double>(i < 10 ? 100 + i : i);
    results[i].predicted = i < 10 || i % 2 == 0 ? 1 : 0;
  }
  std::shuffle(results.begin(), results.end(), rng);
  for (std::size_t i = 0; i < results.size(); ++i) gold[i] = results[i].certainty >= 100.0 ? results[i].predicted : 1;
  f.expect(certainty_filter(results, gold, 0.2) == 1.0, "top 20% accuracy is not 1");
  f.expect(certainty_filter(results, gold, 1.0) < 1.0, "fixture is trivially all correct");
}

std::vector<std::string> tree(const fs::path& root) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root).string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void determinism(Failures& f, const std::string& cli) {
  TempDir dir;
  const json config{{"dataset", {{"fixture", {{"kind", "trend"}, {"seed", 21}}}}},
                    {"attention", {{"generate", {{"layers", 2}, {"heads", 2}, {"weights", "random"}, {"seed", 4}}}}},
                    {"seed", 21}};
  write_file(dir / "config.json", config.dump());
  for (std::string out : {"a", "b"}) {
    if (!cli.empty()) {
      const auto cmd = "\"" + cli + "\" pipeline run -c \"" + (dir / "config.json").string() + "\" -o \"" +
                       (dir / out).string() + "\" > /dev/null";
      f.expect(std::system(cmd.c_str()) == 0, "pipeline run " + out + " failed");
    } else {
      auto c = load_config(dir / "config.json");
      c.output_dir = dir / out;
      f.expect(run_pipeline(c).ok(), "pipeline " + out + " failed");
    }
  }
  const auto files = tree(dir / "a");
  f.expect(files == tree(dir / "b"), "file lists differ");
  f.expect(files.size() > 100, "only " + std::to_string(files.size()) + " files");
  for (const auto& file : files) f.expect(read_file(dir / "a" / file) == read_file(dir / "b" / file), file + " differs");
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  struct Criterion {
    const char* name;
    double limit_seconds;
    std::function<void(Failures&)> run;
  };
  const std::vector<Criterion> criteria{
      {"aggregation-oracle", 5.0, aggregation_oracle},
      {"attention-math", 0.0, attention_math},
      {"lasa-worked-example", 0.0, lasa_examples},
      {"complexity-suite", 10.0, complexity_suite},
      {"gcr-correctness", 0.0, gcr_correctness},
      {"gcr-end-to-end", 30.0, gcr_end_to_end},
      {"counting-fixture", 0.0, counting_fixture},
      {"metrics", 0.0, metrics_axioms},
      {"certainty-contract", 0.0, certainty_contract},
      {"determinism", 0.0, [&cli](Failures& f) { determinism(f, cli); }},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Failures f;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(f);
    } catch (const std::exception& e) {
      f.expect(false, std::string("exception: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_seconds > 0.0) f.expect(seconds < c.limit_seconds, "took " + num(seconds) + " s");
    std::ostringstream timing;
    timing.precision(3);
    timing << std::fixed << seconds;
    if (f.ok()) {
      std::cout << "PASS " << c.name << " (" << timing.str() << " s)\n";
    } else {
      ++failed;
      std::cout << "FAIL " << c.name << " (" << timing.str() << " s): " << f.str() << "\n";
    }
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
