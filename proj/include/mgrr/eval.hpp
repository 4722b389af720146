// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mgrr/error.hpp"
#include "mgrr/model.hpp"

namespace mgrr::eval {

/// AUC requested for an AU whose ground truth contains a single class.
class UndefinedMetricError : public InputError {
 public:
  using InputError::InputError;
};

/// Decision threshold applied to probabilities before F1 and accuracy.
inline constexpr double kThreshold = 0.5;

/// 2PR / (P + R); 0 when P + R = 0.
double f1_frame(std::span<const std::uint8_t> preds, std::span<const std::uint8_t> truth);
/// Plain (unbalanced) accuracy.
double accuracy(std::span<const std::uint8_t> preds, std::span<const std::uint8_t> truth);
/// Mann-Whitney statistic with ties counted one half, via midranks.
double auc(std::span<const double> scores, std::span<const std::uint8_t> truth);
/// Mean Euclidean landmark error over d_o, in percent.
double mean_landmark_error(const std::vector<std::vector<double>>& preds, const std::vector<std::vector<double>>& truths,
                           std::span<const double> inter_ocular);

/// Ranks 1..n with ties sharing their mean rank.
std::vector<double> midranks(std::span<const double> values);
/// Pearson correlation of midranks.
double spearman(std::span<const double> a, std::span<const double> b);

struct MetricReport {
  std::vector<double> f1;
  std::vector<double> accuracy;
  std::vector<std::optional<double>> auc;  // absent for single-class AUs
  double avg_f1 = 0.0;
  double avg_accuracy = 0.0;
  double avg_auc = 0.0;  // over AUs with a defined AUC
  double mean_landmark_error_pct = 0.0;

  std::size_t aus() const { return f1.size(); }
};

/// Metrics of final probabilities against the samples' labels and landmarks.
MetricReport evaluate(const std::vector<Prediction>& predictions, const std::vector<SampleRecord>& samples);

/// Per-AU CSV (`au,f1,accuracy,auc`) plus an `avg` row and landmark error; values in percent.
void write_report_csv(const std::filesystem::path& path, const MetricReport& report);
void print_report(std::ostream& os, const MetricReport& report);

struct AblationRow {
  std::string tag;
  MetricReport report;
};

/// Per-configuration F1 table with deltas against the first row.
struct AblationTable {
  std::vector<std::string> tags;
  std::vector<std::vector<double>> f1;  // percent, [row][au]
  std::vector<double> avg_f1;           // percent
  std::vector<double> delta_avg_f1;     // percent points vs row 0
  std::vector<double> avg_accuracy;
  std::vector<double> avg_auc;
};

AblationTable ablation_report(const std::vector<AblationRow>& runs);
void write_ablation_csv(const std::filesystem::path& path, const AblationTable& table);
void print_ablation(std::ostream& os, const AblationTable& table);

}  // namespace mgrr::eval
