// SPDX-License-Identifier: Apache-2.0
//
// mgrr: generate | prior | train | eval | ablate | inspect | keys

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mgrr/mgrr.h"

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  bool force = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_config = true) {
  if (with_config) {
    cmd->add_option("-c,--config", c.config_path, "run config file (key = value)");
    cmd->add_option("--set", c.sets, "override a config key, key=value (repeatable)");
  }
  cmd->add_flag("-f,--force", c.force, "overwrite a non-empty output directory");
}

int report_failure(mgrr_status s) {
  std::cerr << "mgrr: " << mgrr_status_name(s) << ": " << mgrr_last_error() << '\n';
  return static_cast<int>(s);
}

// Owns a config handle built from --config and --set.
struct Config {
  mgrr_config* handle = nullptr;
  ~Config() { mgrr_config_free(handle); }

  mgrr_status build(const Common& c) {
    if (auto s = mgrr_config_new(&handle); s != MGRR_OK) return s;
    if (!c.config_path.empty())
      if (auto s = mgrr_config_load(handle, c.config_path.c_str()); s != MGRR_OK) return s;
    for (const auto& a : c.sets)
      if (auto s = mgrr_config_assign(handle, a.c_str()); s != MGRR_OK) return s;
    return MGRR_OK;
  }
};

void to_stdout(const char* text, void*) {
  std::fputs(text, stdout);
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-level graph relational reasoning for facial action unit detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mgrr_version()));

  Common common;
  std::string out, data, run, labels, checkpoint, split = "all", variants;
  double smoothing = 1.0;
  bool resume = false, layers = false;
  std::size_t probe = 16;

  auto* gen = app.add_subcommand("generate", "write a synthetic dataset with planted AU structure");
  add_common(gen, common);
  gen->add_option("-o,--out", out, "dataset directory")->required();

  auto* prior = app.add_subcommand("prior", "co-occurrence prior from a labels CSV");
  prior->add_option("-l,--labels", labels, "labels CSV (sample_id,au_1..au_n)")->required()->check(CLI::ExistingFile);
  prior->add_option("-o,--out", out, "adjacency CSV; P is written next to it as <name>_p.csv")->required();
  prior->add_option("-s,--smoothing", smoothing, "additive smoothing of joint counts")->capture_default_str();

  auto* tr = app.add_subcommand("train", "train a model; writes checkpoint, metrics.csv, report.csv");
  add_common(tr, common);
  tr->add_option("-d,--data", data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("-r,--run", run, "run directory")->required();
  tr->add_flag("--resume", resume, "continue from the run directory's checkpoint");

  auto* ev = app.add_subcommand("eval", "metrics of a checkpoint on a dataset");
  ev->add_option("-k,--checkpoint", checkpoint, "checkpoint directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("-d,--data", data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--split", split, "all, train or test")->check(CLI::IsMember({"all", "train", "test"}))
      ->capture_default_str();
  ev->add_option("-o,--out", out, "report CSV");

  auto* ab = app.add_subcommand("ablate", "component ablation or layer sweep under one seed");
  add_common(ab, common);
  ab->add_option("-d,--data", data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  ab->add_option("-o,--out", out, "output directory")->required();
  ab->add_option("--variants", variants,
                 "comma separated subset of baseline,dg,dg_og,dg_cg_pg,dg_og_cg,dg_og_pg,full,k1,k2,k3");
  ab->add_flag("--layers", layers, "sweep K = 1, 2, 3 instead of the component table");

  auto* in = app.add_subcommand("inspect", "dump adjacency matrices and gate statistics");
  in->add_option("-k,--checkpoint", checkpoint, "checkpoint directory")->required()->check(CLI::ExistingDirectory);
  in->add_option("-d,--data", data, "dataset for the probe batch")->check(CLI::ExistingDirectory);
  in->add_option("-o,--out", out, "output directory")->required();
  in->add_option("--probe", probe, "probe batch size")->capture_default_str();

  auto* keys = app.add_subcommand("keys", "list config keys with defaults");

  CLI11_PARSE(app, argc, argv);
  mgrr_set_log(to_stdout, nullptr);

  if (keys->parsed()) {
    for (std::size_t i = 0; i < mgrr_config_key_count(); ++i) {
      std::printf("%-16s = %-10s # %s\n", mgrr_config_key_name(i), mgrr_config_key_default(i),
                  mgrr_config_key_help(i));
    }
    return 0;
  }
  if (prior->parsed()) {
    const auto s = mgrr_prior(labels.c_str(), out.c_str(), smoothing);
    return s == MGRR_OK ? 0 : report_failure(s);
  }
  if (ev->parsed()) {
    const auto s = mgrr_eval(checkpoint.c_str(), data.c_str(), split.c_str(), out.empty() ? nullptr : out.c_str(),
                             nullptr);
    return s == MGRR_OK ? 0 : report_failure(s);
  }
  if (in->parsed()) {
    const auto s = mgrr_inspect(checkpoint.c_str(), data.empty() ? nullptr : data.c_str(), out.c_str(), probe);
    return s == MGRR_OK ? 0 : report_failure(s);
  }

  Config cfg;
  if (auto s = cfg.build(common); s != MGRR_OK) return report_failure(s);
  mgrr_status s = MGRR_OK;
  if (gen->parsed()) {
    s = mgrr_generate(cfg.handle, out.c_str(), common.force);
  } else if (tr->parsed()) {
    s = mgrr_train(cfg.handle, data.c_str(), run.c_str(), resume, common.force);
  } else if (ab->parsed()) {
    if (layers && variants.empty()) variants = "k1,k2,k3";
    s = mgrr_ablate(cfg.handle, data.c_str(), out.c_str(), variants.c_str(), common.force);
  }
  return s == MGRR_OK ? 0 : report_failure(s);
}
