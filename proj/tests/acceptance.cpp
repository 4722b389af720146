// SPDX-License-Identifier: Apache-2.0
//
// Acceptance runner: one PASS/FAIL line per criterion.

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "mgrr/app.hpp"
#include "mgrr/attention.hpp"
#include "mgrr/eval.hpp"
#include "mgrr/fusion.hpp"
#include "mgrr/prior.hpp"
#include "op_cases.hpp"

using namespace mgrr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Criterion 1 --------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  double op_max = 0;
  std::string op_worst;
  std::size_t ops_checked = 0;
  for (const auto& c : testing::op_gradient_cases()) {
    const auto rep = testing::grad_check(c.in, c.f);
    ++ops_checked;
    if (rep.max_rel > op_max) {
      op_max = rep.max_rel;
      op_worst = c.name;
    }
  }
  double model_max = 0;
  std::string model_worst;
  const auto cfg = testing::tiny_config();
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    std::mt19937_64 rng(seed);
    const auto prior = testing::random_prior(cfg.aus, rng);
    Model m(cfg, &prior, seed);
    const auto s = testing::random_sample(cfg, rng);
    BalanceWeights w;
    w.w = {0.8, 1.1, 1.1};
    const auto rep = testing::model_grad_check(m, s, w);
    if (rep.max_rel > model_max) {
      model_max = rep.max_rel;
      model_worst = rep.worst;
    }
  }
  const double secs = seconds_since(t0);
  return {op_max < 1e-6 && model_max < 1e-4 && secs < 120,
          fmt("%zu ops max rel %.2e (%s, < 1e-6); tiny model 3 seeds max rel %.2e (%s, < 1e-4); %.1f s (< 120 s)",
              ops_checked, op_max, op_worst.c_str(), model_max, model_worst.c_str(), secs)};
}

// Criterion 2 --------------------------------------------------------------

double counted_p(const LabelMatrix& l, std::size_t i, std::size_t j, double s) {
  if (i == j) return 1.0;
  double on_j = 0, off_j = 0, agree_on = 0, agree_off = 0;
  for (std::size_t r = 0; r < l.samples; ++r) {
    if (l(r, j)) {
      ++on_j;
      agree_on += l(r, i) == 1;
    } else {
      ++off_j;
      agree_off += l(r, i) == 0;
    }
  }
  return 0.5 * ((agree_on + s) / (on_j + 2 * s) + (agree_off + s) / (off_j + 2 * s));
}

Outcome prior_oracle() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> Nd(1, 1000), nd(1, 12);
  std::uniform_real_distribution<double> rate(0.05, 0.95);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    LabelMatrix l;
    l.samples = Nd(rng);
    l.aus = nd(rng);
    std::vector<double> q(l.aus);
    for (auto& v : q) v = rate(rng);
    for (std::size_t r = 0; r < l.samples; ++r) {
      l.sample_ids.push_back("s" + std::to_string(r));
      for (std::size_t i = 0; i < l.aus; ++i) {
        const bool copy = i % 2 == 1 && std::bernoulli_distribution(0.7)(rng);
        l.values.push_back(copy ? l.values.back() : std::bernoulli_distribution(q[i])(rng));
      }
    }
    const auto p = compute_prior(l, 1.0);
    for (std::size_t i = 0; i < l.aus; ++i)
      for (std::size_t j = 0; j < l.aus; ++j) worst = std::max(worst, std::abs(p.p_cond.at(i, j) - counted_p(l, i, j, 1.0)));
  }
  const bool fixed = adjacency_from_agreement(0.5) == 0.0 && adjacency_from_agreement(0.0) == 1.0 &&
                     adjacency_from_agreement(1.0) == 1.0;
  return {worst <= 1e-12 && fixed,
          fmt("50 label sets max |diff| %.1e (<= 1e-12); fixed points %s", worst, fixed ? "exact" : "violated")};
}

// Criterion 3 --------------------------------------------------------------

Tensor permute_rows(const Tensor& x, const std::vector<std::size_t>& perm) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t c = 0; c < x.dim(1); ++c) out.at(i, c) = x.at(perm[i], c);
  return out;
}

Outcome attention_invariants() {
  std::size_t heads_seen = 0;
  double worst_row = 0;
  attention::AlphaObserver observe = [&](std::size_t, const Tensor& alpha) {
    ++heads_seen;
    for (std::size_t r = 0; r < alpha.dim(0); ++r) {
      double s = 0;
      for (std::size_t c = 0; c < alpha.dim(1); ++c) s += alpha.at(r, c);
      worst_row = std::max(worst_row, std::abs(s - 1.0));
    }
  };
  ForwardProbe probe;
  probe.alpha = observe;
  std::vector<ModelConfig> configs = {testing::tiny_config()};
  auto wide = testing::tiny_config();
  wide.layers = 2;
  wide.heads = 8;
  wide.attn_width = 16;
  configs.push_back(wide);
  std::size_t passes = 0;
  for (std::size_t k = 0; k < configs.size(); ++k) {
    std::mt19937_64 rng(30 + k);
    const auto prior = testing::random_prior(configs[k].aus, rng);
    Model m(configs[k], &prior, k);
    for (int s = 0; s < 10; ++s, ++passes) {
      Tape tape;
      m.forward(tape, testing::random_sample(configs[k], rng), &probe);
    }
  }

  std::mt19937_64 rng(6);
  double worst_perm = 0;
  for (int t = 0; t < 20; ++t) {
    ParameterStore store;
    const std::size_t n = 3 + t % 5, w = 2 + t % 4, heads = 1 + t % 3;
    const auto p = attention::make_gat_params(store, "g", w, heads * 2, heads, rng);
    const auto x = testing::random_tensor({n, w}, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Tape tape;
    const auto y = attention::mh_gat_layer({tape.constant(x), {}}, p, &observe).value();
    const auto yp = attention::mh_gat_layer({tape.constant(permute_rows(x, perm)), {}}, p, &observe).value();
    const auto expect = permute_rows(y, perm);
    for (std::size_t i = 0; i < y.numel(); ++i) worst_perm = std::max(worst_perm, std::abs(yp[i] - expect[i]));
  }
  return {heads_seen > 0 && worst_row <= 1e-12 && worst_perm <= 1e-12,
          fmt("%zu attention maps over %zu model passes and 40 layer calls, max |row sum - 1| %.1e (<= 1e-12); "
              "permutation max |diff| %.1e over 20 instances",
              heads_seen, passes, worst_row, worst_perm)};
}

// Criterion 4 --------------------------------------------------------------

Outcome fusion_invariants() {
  std::mt19937_64 rng(2);
  double worst = 0;  // largest violation of any bound
  std::size_t elements = 0;
  for (int t = 0; t < 100; ++t) {
    ParameterStore store;
    const std::size_t rows = 1 + t % 4, F = 2 + t % 7;
    const auto p = fusion::make_gfc_params(store, "g", F, rng);
    Tape tape;
    const auto a = tape.constant(testing::random_tensor({rows, F}, rng, -3, 3));
    const auto b = tape.constant(testing::random_tensor({rows, F}, rng, -3, 3));
    Var beta;
    const auto y = fusion::gfc(a, b, p, &beta).value();
    const auto xa = ops::l2_normalize(ops::matmul(a, tape.constant(p.content_a->value)), 1).value();
    const auto xb = ops::l2_normalize(ops::matmul(b, tape.constant(p.content_b->value)), 1).value();
    for (std::size_t i = 0; i < y.numel(); ++i, ++elements) {
      const double bv = beta.value()[i];
      if (!(bv > 0 && bv < 1)) worst = std::max(worst, 1.0);
      worst = std::max(worst, std::min(xa[i], xb[i]) - y[i]);
      worst = std::max(worst, y[i] - std::max(xa[i], xb[i]));
      worst = std::max(worst, std::abs(y[i]) - std::max(std::abs(xa[i]), std::abs(xb[i])));
      worst = std::max(worst, std::abs(y[i]) - 1.0);
    }
  }
  return {worst <= 1e-9, fmt("100 instances, %zu elements: beta in (0,1), output between branches and |y| <= 1; "
                             "largest violation %.1e (<= 1e-9)",
                             elements, std::max(worst, 0.0))};
}

// Criteria 5 and 7 ---------------------------------------------------------

const std::vector<std::string> kTrendVariants = {"baseline", "dg_cg_pg", "dg_og_cg", "dg_og_pg", "full"};

struct BenchRuns {
  std::map<std::string, std::vector<double>> f1;  // percent per seed
  std::vector<double> spearman;                   // full model, per seed
  double seconds = 0;
};

BenchRuns run_bench(const RunConfig& base, std::size_t seeds, const fs::path& work) {
  BenchRuns out;
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(work);
  std::ofstream csv(work / "ablation_trend.csv");
  csv << "seed,variant,avg_f1,avg_auc,spearman_layer1\n";
  for (std::size_t s = 0; s < seeds; ++s) {
    auto cfg = base;
    cfg.set("seed", std::to_string(s));
    cfg.set("data_seed", std::to_string(s));
    const auto split = app::split_dataset(data::generate(cfg.synth()), cfg);
    const auto planted = data::planted_prior(cfg.synth());
    for (const auto& v : kTrendVariants) {
      const auto r = app::train_model(app::apply_variant(cfg, v), split);
      out.f1[v].push_back(100.0 * r.report.avg_f1);
      std::string sp = "NA";
      if (v == "full") {
        const auto& adj = r.model->params().get("layer0.region.adj").value;
        std::vector<double> learned, target;
        for (std::size_t i = 0; i < adj.dim(0); ++i)
          for (std::size_t j = 0; j < adj.dim(1); ++j)
            if (i != j) {
              learned.push_back(adj.at(i, j));
              target.push_back(planted.a_init.at(i, j));
            }
        out.spearman.push_back(eval::spearman(learned, target));
        sp = fmt("%.4f", out.spearman.back());
      }
      csv << s << ',' << v << ',' << fmt("%.2f", 100.0 * r.report.avg_f1) << ','
          << fmt("%.2f", 100.0 * r.report.avg_auc) << ',' << sp << '\n';
      std::fprintf(stderr, "  bench seed %zu %-9s avg F1 %.2f (%.0f s elapsed)\n", s, v.c_str(),
                   100.0 * r.report.avg_f1, seconds_since(t0));
    }
  }
  out.seconds = seconds_since(t0);
  return out;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

Outcome ablation_trend(const BenchRuns& b) {
  const double full = mean(b.f1.at("full")), base = mean(b.f1.at("baseline"));
  bool ordered = true;
  std::string means;
  for (const auto& v : kTrendVariants) {
    means += fmt("%s %.2f, ", v.c_str(), mean(b.f1.at(v)));
    if (v != "full" && v != "baseline" && full < mean(b.f1.at(v))) ordered = false;
  }
  const bool pass = full - base >= 2.0 && ordered && b.seconds < 1800;
  return {pass, fmt("mean avg F1 over %zu seeds: %sfull - baseline %+.2f (>= 2.0), full >= every single-branch "
                    "ablation: %s; %.0f s (< 1800 s)",
                    b.f1.at("full").size(), means.c_str(), full - base, ordered ? "yes" : "no", b.seconds)};
}

Outcome structure_recovery(const BenchRuns& b) {
  std::size_t above = 0;
  std::string list;
  for (double s : b.spearman) {
    above += s > 0.5;
    list += fmt("%.3f ", s);
  }
  return {2 * above > b.spearman.size(),
          fmt("layer-1 adjacency vs planted ordering, spearman per seed: %s(> 0.5 on %zu of %zu)", list.c_str(), above,
              b.spearman.size())};
}

// Criterion 6 --------------------------------------------------------------

Outcome layer_sweep(const RunConfig& cfg, const fs::path& work) {
  std::ostringstream log;
  fs::remove_all(work);
  app::cmd_generate(cfg, work / "data", true, log);
  const auto table = app::cmd_ablate(cfg, work / "data", work / "sweep", app::layer_variants(), true, log);
  const std::size_t n = static_cast<std::size_t>(cfg.get_int("aus"));
  bool shape = table.tags == app::layer_variants() && table.avg_f1.size() == 3;
  for (const auto& row : table.f1) shape = shape && row.size() == n;
  std::ifstream is(work / "sweep" / "ablation.csv");
  std::string header, line;
  std::getline(is, header);
  std::size_t rows = 0;
  while (std::getline(is, line)) ++rows;
  const auto columns = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
  shape = shape && rows == 3 && columns == 1 + n + 4 && header.find("avg_f1") != std::string::npos;
  return {shape, fmt("K = 1, 2, 3 completed; ablation.csv has %zu rows and %zu columns (config, %zu per-AU F1, "
                     "avg_f1, delta, acc, auc); avg F1 %.2f / %.2f / %.2f",
                     rows, columns, n, table.avg_f1[0], table.avg_f1[1], table.avg_f1[2])};
}

// Criterion 8 --------------------------------------------------------------

Outcome metrics_oracle() {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> level(0, 5), len(2, 40);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = len(rng);
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    for (int i = 0; i < n; ++i) {
      s[i] = level(rng) / 5.0;
      y[i] = std::bernoulli_distribution(0.4)(rng);
    }
    y[0] = 1;
    y[1] = 0;
    double wins = 0, pairs = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (y[i] && !y[j]) {
          pairs += 1;
          wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
    worst = std::max(worst, std::abs(eval::auc(s, y) - wins / pairs));
  }
  // tp 3, fp 1, fn 2, tn 1.
  const std::vector<std::uint8_t> pred = {1, 1, 1, 1, 0, 0, 0}, truth = {1, 1, 1, 0, 1, 1, 0};
  const double f1 = eval::f1_frame(pred, truth), acc = eval::accuracy(pred, truth);
  const bool hand = std::abs(f1 - 2.0 / 3.0) < 1e-12 && std::abs(acc - 4.0 / 7.0) < 1e-12;
  return {worst < 1e-12 && hand, fmt("AUC vs pair enumeration on 100 instances max |diff| %.1e; hand example F1 %.4f "
                                     "(2/3), accuracy %.4f (4/7)",
                                     worst, f1, acc)};
}

// Criterion 9 --------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome determinism(const RunConfig& cfg, const fs::path& work) {
  fs::remove_all(work);
  std::ostringstream log;
  for (const char* tag : {"a", "b"}) {
    const auto dir = work / tag;
    app::cmd_generate(cfg, dir / "data", false, log);
    app::cmd_prior(dir / "data" / "labels.csv", dir / "prior.csv", cfg.smoothing(), log);
    app::cmd_train(cfg, dir / "data", dir / "run", false, false, log);
    app::cmd_eval(dir / "run" / "checkpoint", dir / "data", "test", dir / "eval.csv", log);
  }
  std::size_t compared = 0;
  std::vector<std::string> differing;
  for (const auto& entry : fs::recursive_directory_iterator(work / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), work / "a");
    ++compared;
    if (!fs::exists(work / "b" / rel) || slurp(entry.path()) != slurp(work / "b" / rel)) differing.push_back(rel.string());
  }
  std::string diff;
  for (const auto& d : differing) diff += " " + d;
  return {differing.empty() && compared > 0,
          fmt("generate, prior, train, eval twice: %zu files compared byte for byte, %zu differ%s", compared,
              differing.size(), diff.c_str())};
}

// Criterion 10 -------------------------------------------------------------

Outcome overfit() {
  std::mt19937_64 rng(2);
  const auto cfg = testing::tiny_config();
  const auto prior = testing::random_prior(cfg.aus, rng);
  const auto s = testing::random_sample(cfg, rng);
  Model m(cfg, &prior, 3);
  BalanceWeights w;
  w.w.assign(cfg.aus, 1.0);
  train::Trainer t(m, w, train::TrainConfig{});
  const SampleRecord* batch[] = {&s};
  train::StepLosses l;
  std::size_t steps = 0;
  while (steps < 300) {
    l = t.step(batch, 0.05);
    ++steps;
    if (l.total < 0.05) break;
  }
  return {l.total < 0.05, fmt("joint loss %.4f after %zu steps (< 0.05 within 300)", l.total, steps)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli("acceptance criteria");
  std::string criteria = "1,2,3,4,5,6,7,8,9,10";
  fs::path work = fs::temp_directory_path() / "mgrr_acceptance";
  fs::path config_dir = MGRR_CONFIG_DIR;
  std::size_t seeds = 3;
  cli.add_option("--criteria", criteria, "comma separated subset")->capture_default_str();
  cli.add_option("--work", work, "scratch directory")->capture_default_str();
  cli.add_option("--configs", config_dir, "directory holding tiny.cfg and bench.cfg")->capture_default_str();
  cli.add_option("--seeds", seeds, "seeds of the synthetic benchmark")->capture_default_str();
  CLI11_PARSE(cli, argc, argv);

  std::set<int> wanted;
  {
    std::stringstream ss(criteria);
    std::string item;
    while (std::getline(ss, item, ',')) wanted.insert(std::stoi(item));
  }
  RunConfig tiny, bench;
  tiny.load_file(config_dir / "tiny.cfg");
  bench.load_file(config_dir / "bench.cfg");

  std::optional<BenchRuns> bench_runs;
  const auto bench_once = [&]() -> const BenchRuns& {
    if (!bench_runs) bench_runs = run_bench(bench, seeds, work / "bench");
    return *bench_runs;
  };
  const std::vector<std::pair<const char*, std::function<Outcome()>>> checks = {
      {"gradient suite", gradient_suite},
      {"prior oracle", prior_oracle},
      {"attention invariants", attention_invariants},
      {"fusion invariants", fusion_invariants},
      {"ablation trend", [&] { return ablation_trend(bench_once()); }},
      {"layer sweep", [&] { return layer_sweep(tiny, work / "layers"); }},
      {"structure recovery", [&] { return structure_recovery(bench_once()); }},
      {"metrics oracle", metrics_oracle},
      {"determinism", [&] { return determinism(tiny, work / "determinism"); }},
      {"single-sample overfit", overfit},
  };
  int failed = 0;
  for (std::size_t k = 0; k < checks.size(); ++k) {
    if (!wanted.count(static_cast<int>(k + 1))) continue;
    Outcome o;
    try {
      o = checks[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", k + 1, checks[k].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
