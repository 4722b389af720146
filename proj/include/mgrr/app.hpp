// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mgrr/checkpoint.hpp"
#include "mgrr/config.hpp"
#include "mgrr/data.hpp"
#include "mgrr/eval.hpp"
#include "mgrr/model.hpp"
#include "mgrr/train.hpp"

// Command implementations shared by the C API, the CLI and the acceptance runner.
namespace mgrr::app {

namespace fs = std::filesystem;

/// Train/test halves of a dataset under the config's data_seed and test_fraction.
struct Split {
  std::vector<SampleRecord> train;
  std::vector<SampleRecord> test;
};
Split split_dataset(const data::Dataset& ds, const RunConfig& cfg);
/// Dataset extents must agree with the config; ManifestError otherwise.
void check_compatible(const data::Dataset& ds, const RunConfig& cfg);

struct TrainResult {
  std::unique_ptr<Model> model;
  PriorMatrix prior;
  BalanceWeights weights;
  std::vector<train::EpochLog> log;
  eval::MetricReport report;  // on the test half (training half when it is empty)
};

/// Called after every epoch with the partially filled result.
using EpochCallback = std::function<void(const TrainResult&, const train::NesterovSgd&)>;

/// Prior and balance weights from the training labels, model init, then the
/// remaining epochs. `resume` continues from a stored state.
TrainResult train_model(const RunConfig& cfg, const Split& split, const Checkpoint* resume = nullptr,
                        const EpochCallback& on_epoch = {});

void write_metrics_log(const fs::path& path, const std::vector<train::EpochLog>& log);
std::vector<train::EpochLog> read_metrics_log(const fs::path& path);

/// Rows of the component ablation, in table order.
const std::vector<std::string>& ablation_variants();
/// Rows of the layer sweep (K = 1, 2, 3 on the full model).
const std::vector<std::string>& layer_variants();
/// Config with the toggles / layer count of a variant tag applied.
RunConfig apply_variant(RunConfig cfg, const std::string& tag);

/// Refuses a non-empty directory unless `force`; creates it otherwise.
void prepare_output_dir(const fs::path& dir, bool force);

struct InspectSummary {
  std::vector<Tensor> adjacency;  // one per layer, empty without the dynamic graph
  std::optional<double> planted_spearman;  // layer-1 ranking vs the planted structure
};

void cmd_generate(const RunConfig& cfg, const fs::path& out, bool force, std::ostream& log);
void cmd_prior(const fs::path& labels, const fs::path& out, double smoothing, std::ostream& log);
TrainResult cmd_train(const RunConfig& cfg, const fs::path& data, const fs::path& run, bool resume, bool force,
                      std::ostream& log);
/// `split` is one of all, train, test.
eval::MetricReport cmd_eval(const fs::path& checkpoint, const fs::path& data, const std::string& split,
                            const fs::path& out_csv, std::ostream& log);
eval::AblationTable cmd_ablate(const RunConfig& cfg, const fs::path& data, const fs::path& out,
                               const std::vector<std::string>& variants, bool force, std::ostream& log);
InspectSummary cmd_inspect(const fs::path& checkpoint, const fs::path& data, const fs::path& out,
                           std::size_t probe_count, std::ostream& log);

}  // namespace mgrr::app
