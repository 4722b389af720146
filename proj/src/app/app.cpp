// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

#include "common/csv.hpp"
#include "mgrr/app.hpp"
#include "mgrr/error.hpp"

namespace mgrr::app {

namespace {

LabelMatrix labels_of(const std::vector<SampleRecord>& samples, std::size_t aus) {
  LabelMatrix lm;
  lm.samples = samples.size();
  lm.aus = aus;
  for (const auto& s : samples) {
    lm.sample_ids.push_back(s.id);
    lm.values.insert(lm.values.end(), s.labels.begin(), s.labels.end());
  }
  return lm;
}

// Keys that may differ when resuming a run.
const std::set<std::string> kResumeMutable = {"epochs", "threads"};

void check_resume_config(const RunConfig& stored, const RunConfig& given) {
  for (const auto& [k, v] : stored.values()) {
    if (kResumeMutable.count(k)) continue;
    if (given.get(k) != v) {
      throw ManifestError("cannot resume: '" + k + "' is " + given.get(k) + " but the checkpoint was trained with " + v);
    }
  }
}

std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& ck) {
  auto model = std::make_unique<Model>(ck.config.model(), &ck.prior, ck.config.training().seed);
  restore_parameters(ck, *model);
  return model;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

Split split_dataset(const data::Dataset& ds, const RunConfig& cfg) {
  const auto [tr, te] = data::split_indices(ds.samples.size(), cfg.test_fraction(),
                                            static_cast<std::uint64_t>(cfg.get_int("data_seed")));
  Split s;
  for (auto i : tr) s.train.push_back(ds.samples[i]);
  for (auto i : te) s.test.push_back(ds.samples[i]);
  return s;
}

void check_compatible(const data::Dataset& ds, const RunConfig& cfg) {
  const auto check = [&](const char* key, std::size_t have) {
    const auto want = static_cast<std::size_t>(cfg.get_int(key));
    if (have != want) {
      throw ManifestError(std::string("dataset has ") + key + " = " + std::to_string(have) + " but the config expects " +
                          std::to_string(want));
    }
  };
  check("aus", ds.aus);
  check("landmarks", ds.landmarks);
  check("image_size", ds.image_size);
  check("image_channels", ds.image_channels);
}

TrainResult train_model(const RunConfig& cfg, const Split& split, const Checkpoint* resume,
                        const EpochCallback& on_epoch) {
  if (split.train.empty()) throw InputError("no training samples");
  const auto mc = cfg.model();
  const auto tc = cfg.training();
  TrainResult r;
  if (resume) {
    r.prior = resume->prior;
    r.weights = resume->weights;
  } else {
    const auto labels = labels_of(split.train, mc.aus);
    r.prior = compute_prior(labels, cfg.smoothing());
    r.weights = compute_balance_weights(labels, cfg.smoothing());
  }
  r.model = std::make_unique<Model>(mc, &r.prior, tc.seed);
  train::Trainer trainer(*r.model, r.weights, tc);
  std::size_t start = 0;
  if (resume) {
    restore_parameters(*resume, *r.model);
    restore_momentum(*resume, *r.model, trainer.optimizer());
    start = resume->epoch;
  }
  for (std::size_t e = start; e < tc.epochs; ++e) {
    r.log.push_back(trainer.run_epoch(split.train, split.test, e));
    if (on_epoch) on_epoch(r, trainer.optimizer());
  }
  const auto& probe = split.test.empty() ? split.train : split.test;
  r.report = eval::evaluate(train::predict_all(*r.model, probe, tc.threads), probe);
  return r;
}

void write_metrics_log(const fs::path& path, const std::vector<train::EpochLog>& log) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw InputError("cannot write " + path.string());
  os << "epoch,lr,loss_au,loss_int,loss_align,avg_f1,avg_acc,avg_auc,mean_landmark_err\n";
  for (const auto& e : log) {
    os << e.epoch << ',' << num(e.lr) << ',' << num(e.loss_au) << ',' << num(e.loss_int) << ',' << num(e.loss_align)
       << ',' << num(e.avg_f1) << ',' << num(e.avg_acc) << ',' << num(e.avg_auc) << ',' << num(e.mean_landmark_err)
       << '\n';
  }
}

std::vector<train::EpochLog> read_metrics_log(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  std::vector<train::EpochLog> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const auto cells = csv::split(line);
    if (cells.size() != 9) throw ParseError(path.string() + ": expected 9 columns", lineno);
    std::vector<double> v;
    for (std::size_t k = 1; k < cells.size(); ++k) {
      const auto d = csv::parse_double(cells[k]);
      if (!d) throw ParseError(path.string() + ": bad number '" + cells[k] + "'", lineno);
      v.push_back(*d);
    }
    const auto ep = csv::parse_int(cells[0]);
    if (!ep || *ep < 0) throw ParseError(path.string() + ": bad epoch", lineno);
    out.push_back({static_cast<std::size_t>(*ep), v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]});
  }
  return out;
}

const std::vector<std::string>& ablation_variants() {
  static const std::vector<std::string> v = {"baseline", "dg", "dg_og", "dg_cg_pg", "dg_og_cg", "dg_og_pg", "full"};
  return v;
}

const std::vector<std::string>& layer_variants() {
  static const std::vector<std::string> v = {"k1", "k2", "k3"};
  return v;
}

RunConfig apply_variant(RunConfig cfg, const std::string& tag) {
  const auto toggles = [&](bool dg, bool og, bool cg, bool pg) {
    cfg.set("enable_dg", dg ? "true" : "false");
    cfg.set("enable_og", og ? "true" : "false");
    cfg.set("enable_cg", cg ? "true" : "false");
    cfg.set("enable_pg", pg ? "true" : "false");
  };
  if (tag == "baseline") toggles(false, false, false, false);
  else if (tag == "dg") toggles(true, false, false, false);
  else if (tag == "dg_og") toggles(true, true, false, false);
  else if (tag == "dg_cg_pg") toggles(true, false, true, true);
  else if (tag == "dg_og_cg") toggles(true, true, true, false);
  else if (tag == "dg_og_pg") toggles(true, true, false, true);
  else if (tag == "full") toggles(true, true, true, true);
  else if (tag.size() == 2 && tag[0] == 'k' && tag[1] >= '1' && tag[1] <= '9') {
    toggles(true, true, true, true);
    cfg.set("layers", tag.substr(1));
  } else {
    throw SpecError("unknown ablation variant '" + tag + "'");
  }
  return cfg;
}

void prepare_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw InputError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir)) {
      if (!force) throw InputError(dir.string() + " is not empty (use --force to overwrite)");
      fs::remove_all(dir);
    }
  }
  fs::create_directories(dir);
}

void cmd_generate(const RunConfig& cfg, const fs::path& out, bool force, std::ostream& log) {
  const auto spec = cfg.synth();
  spec.validate();
  prepare_output_dir(out, force);
  const auto ds = data::generate(spec);
  data::write_dataset(out, ds);
  cfg.write_file(out / "config.cfg");
  log << "generated " << ds.samples.size() << " samples in " << out.string() << '\n';
}

void cmd_prior(const fs::path& labels, const fs::path& out, double smoothing, std::ostream& log) {
  const auto lm = read_labels_csv(labels);
  const auto prior = compute_prior(lm, smoothing);
  write_matrix_csv(out, prior.a_init);
  auto p_path = out;
  p_path.replace_extension();
  p_path += "_p.csv";
  write_matrix_csv(p_path, prior.p_cond);
  log << "prior over " << lm.aus << " AUs from " << lm.samples << " samples: " << out.string() << ", "
      << p_path.string() << '\n';
}

TrainResult cmd_train(const RunConfig& cfg, const fs::path& data, const fs::path& run, bool resume, bool force,
                      std::ostream& log) {
  std::optional<Checkpoint> ck;
  std::vector<train::EpochLog> history;
  if (resume) {
    ck = load_checkpoint(run / "checkpoint");
    check_resume_config(ck->config, cfg);
    if (fs::exists(run / "metrics.csv")) {
      for (const auto& e : read_metrics_log(run / "metrics.csv"))
        if (e.epoch < ck->epoch) history.push_back(e);
    }
    log << "resuming at epoch " << ck->epoch << std::endl;
  } else {
    prepare_output_dir(run, force);
  }
  const auto ds = data::read_dataset(data);
  check_compatible(ds, cfg);
  const auto split = split_dataset(ds, cfg);
  cfg.write_file(run / "config.cfg");

  const auto save = [&](const TrainResult& r, const train::NesterovSgd& opt, std::size_t epoch) {
    save_checkpoint(run / "checkpoint", cfg, *r.model, &opt, epoch, r.prior, r.weights);
  };
  auto result = train_model(cfg, split, ck ? &*ck : nullptr, [&](const TrainResult& r, const train::NesterovSgd& opt) {
    const auto& e = r.log.back();
    history.push_back(e);
    write_metrics_log(run / "metrics.csv", history);
    save(r, opt, e.epoch + 1);
    log << "epoch " << e.epoch << " lr " << e.lr << " loss_au " << e.loss_au << " loss_int " << e.loss_int
        << " loss_align " << e.loss_align << " avg_f1 " << e.avg_f1 << std::endl;
  });
  if (result.log.empty()) {
    // Nothing trained in this call: record the initial (or resumed) state.
    const std::size_t epoch = ck ? ck->epoch : 0;
    train::NesterovSgd opt(result.model->params(), cfg.training().optimizer);
    if (ck) restore_momentum(*ck, *result.model, opt);
    save_checkpoint(run / "checkpoint", cfg, *result.model, &opt, epoch, result.prior, result.weights);
    write_metrics_log(run / "metrics.csv", history);
  }
  eval::write_report_csv(run / "report.csv", result.report);
  eval::print_report(log, result.report);
  return result;
}

eval::MetricReport cmd_eval(const fs::path& checkpoint, const fs::path& data, const std::string& split,
                            const fs::path& out_csv, std::ostream& log) {
  const auto ck = load_checkpoint(checkpoint);
  const auto model = model_from_checkpoint(ck);
  const auto ds = data::read_dataset(data);
  check_compatible(ds, ck.config);
  std::vector<SampleRecord> samples;
  if (split == "all") {
    samples = ds.samples;
  } else if (split == "train" || split == "test") {
    auto halves = split_dataset(ds, ck.config);
    samples = split == "train" ? std::move(halves.train) : std::move(halves.test);
  } else {
    throw InputError("split must be all, train or test");
  }
  if (samples.empty()) throw InputError("no samples in the '" + split + "' split");
  const auto report = eval::evaluate(train::predict_all(*model, samples, ck.config.training().threads), samples);
  if (!out_csv.empty()) eval::write_report_csv(out_csv, report);
  eval::print_report(log, report);
  return report;
}

eval::AblationTable cmd_ablate(const RunConfig& cfg, const fs::path& data, const fs::path& out,
                               const std::vector<std::string>& variants, bool force, std::ostream& log) {
  const auto& tags = variants.empty() ? ablation_variants() : variants;
  if (tags.size() < 2) throw InputError("an ablation needs at least two variants");
  for (const auto& t : tags) apply_variant(cfg, t);  // reject unknown tags before any training
  const auto ds = data::read_dataset(data);
  check_compatible(ds, cfg);
  prepare_output_dir(out, force);
  cfg.write_file(out / "config.cfg");
  const auto split = split_dataset(ds, cfg);
  std::vector<eval::AblationRow> rows;
  for (const auto& tag : tags) {
    const auto vcfg = apply_variant(cfg, tag);
    log << "variant " << tag << std::endl;
    const auto r = train_model(vcfg, split);
    fs::create_directories(out / tag);
    vcfg.write_file(out / tag / "config.cfg");
    write_metrics_log(out / tag / "metrics.csv", r.log);
    eval::write_report_csv(out / tag / "report.csv", r.report);
    rows.push_back({tag, r.report});
  }
  const auto table = eval::ablation_report(rows);
  eval::write_ablation_csv(out / "ablation.csv", table);
  eval::print_ablation(log, table);
  return table;
}

InspectSummary cmd_inspect(const fs::path& checkpoint, const fs::path& data, const fs::path& out,
                           std::size_t probe_count, std::ostream& log) {
  const auto ck = load_checkpoint(checkpoint);
  const auto model = model_from_checkpoint(ck);
  const auto mc = ck.config.model();
  fs::create_directories(out);
  InspectSummary summary;
  for (std::size_t k = 0; k < mc.layers; ++k) {
    const auto* adj = model->params().find("layer" + std::to_string(k) + ".region.adj");
    if (!adj) continue;
    summary.adjacency.push_back(adj->value);
    write_matrix_csv(out / ("adjacency_layer" + std::to_string(k + 1) + ".csv"), adj->value);
  }
  log << "wrote " << summary.adjacency.size() << " adjacency matrices to " << out.string() << '\n';

  const auto spec = ck.config.synth();
  if (!summary.adjacency.empty() && !spec.links.empty()) {
    const auto planted = data::planted_prior(spec);
    std::vector<double> learned, target;
    for (std::size_t i = 0; i < mc.aus; ++i)
      for (std::size_t j = 0; j < mc.aus; ++j)
        if (i != j) {
          learned.push_back(summary.adjacency[0].at(i, j));
          target.push_back(planted.a_init.at(i, j));
        }
    try {
      summary.planted_spearman = eval::spearman(learned, target);
      log << "layer 1 adjacency vs planted structure: spearman " << *summary.planted_spearman << '\n';
    } catch (const eval::UndefinedMetricError&) {
    }
  }

  if (!data.empty() && probe_count > 0) {
    const auto ds = data::read_dataset(data);
    check_compatible(ds, ck.config);
    const std::size_t count = std::min(probe_count, ds.samples.size());
    const char* names[3] = {"pair", "global", "local"};
    const std::size_t slots = 3 * mc.layers;
    std::vector<double> sum(slots, 0.0), sq(slots, 0.0), lo(slots, INFINITY), hi(slots, -INFINITY);
    std::vector<std::size_t> cnt(slots, 0);
    for (std::size_t s = 0; s < count; ++s) {
      std::vector<Tensor> gates;
      ForwardProbe probe;
      probe.gates = &gates;
      model->predict(ds.samples[s], &probe);
      for (std::size_t g = 0; g < gates.size() && g < slots; ++g) {
        for (double v : gates[g].data()) {
          sum[g] += v;
          sq[g] += v * v;
          lo[g] = std::min(lo[g], v);
          hi[g] = std::max(hi[g], v);
          ++cnt[g];
        }
      }
    }
    std::ofstream os(out / "gates.csv", std::ios::trunc);
    if (!os) throw InputError("cannot write gate statistics in " + out.string());
    os << "layer,gate,mean,std,min,max,count\n";
    for (std::size_t g = 0; g < slots; ++g) {
      if (!cnt[g]) continue;
      const double mean = sum[g] / cnt[g];
      const double var = std::max(0.0, sq[g] / cnt[g] - mean * mean);
      os << g / 3 + 1 << ',' << names[g % 3] << ',' << num(mean) << ',' << num(std::sqrt(var)) << ',' << num(lo[g])
         << ',' << num(hi[g]) << ',' << cnt[g] << '\n';
    }
    log << "gate statistics over " << count << " probe samples: " << (out / "gates.csv").string() << '\n';
  }
  return summary;
}

}  // namespace mgrr::app
