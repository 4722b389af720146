// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>

#include "mgrr/eval.hpp"

namespace mgrr::eval {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw InputError(std::string(what) + ": prediction and truth lengths differ");
}

}  // namespace

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = 0.5 * static_cast<double>(i + 1 + j);
    i = j;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  require_same_length(a.size(), b.size(), "spearman");
  if (a.size() < 2) throw UndefinedMetricError("spearman: need at least two values");
  const auto ra = midranks(a), rb = midranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0 || sbb == 0) throw UndefinedMetricError("spearman: constant input");
  return sab / std::sqrt(saa * sbb);
}

double f1_frame(std::span<const std::uint8_t> preds, std::span<const std::uint8_t> truth) {
  require_same_length(preds.size(), truth.size(), "f1_frame");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    tp += preds[i] && truth[i];
    fp += preds[i] && !truth[i];
    fn += !preds[i] && truth[i];
  }
  const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  return precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

double accuracy(std::span<const std::uint8_t> preds, std::span<const std::uint8_t> truth) {
  require_same_length(preds.size(), truth.size(), "accuracy");
  if (preds.empty()) throw InputError("accuracy: no samples");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hit += (preds[i] != 0) == (truth[i] != 0);
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

double auc(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  require_same_length(scores.size(), truth.size(), "auc");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos = 0, rank_sum = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (truth[order[k]]) {
        rank_sum += midrank;
        pos += 1;
      }
    i = j;
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0 || neg == 0) throw UndefinedMetricError("auc: ground truth contains a single class");
  return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

double mean_landmark_error(const std::vector<std::vector<double>>& preds, const std::vector<std::vector<double>>& truths,
                           std::span<const double> inter_ocular) {
  if (preds.size() != truths.size() || preds.size() != inter_ocular.size()) {
    throw InputError("mean_landmark_error: sample counts differ");
  }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    if (!(inter_ocular[s] > 0.0)) throw InputError("mean_landmark_error: inter-ocular distance must be positive");
    if (preds[s].size() != truths[s].size() || preds[s].size() % 2) {
      throw InputError("mean_landmark_error: landmark counts differ");
    }
    for (std::size_t k = 0; k + 1 < preds[s].size(); k += 2) {
      const double dx = preds[s][k] - truths[s][k], dy = preds[s][k + 1] - truths[s][k + 1];
      total += std::sqrt(dx * dx + dy * dy) / inter_ocular[s];
      ++count;
    }
  }
  return count ? 100.0 * total / static_cast<double>(count) : 0.0;
}

MetricReport evaluate(const std::vector<Prediction>& predictions, const std::vector<SampleRecord>& samples) {
  if (predictions.size() != samples.size() || samples.empty()) {
    throw InputError("evaluate: need one prediction per sample and at least one sample");
  }
  const std::size_t n = samples.front().labels.size();
  MetricReport r;
  std::vector<std::vector<double>> lp, lt;
  std::vector<double> d;
  for (std::size_t au = 0; au < n; ++au) {
    std::vector<std::uint8_t> pred, truth;
    std::vector<double> score;
    for (std::size_t s = 0; s < samples.size(); ++s) {
      if (predictions[s].p_final.size() != n || samples[s].labels.size() != n) {
        throw InputError("evaluate: AU count differs between predictions and labels");
      }
      score.push_back(predictions[s].p_final[au]);
      pred.push_back(predictions[s].p_final[au] >= kThreshold);
      truth.push_back(samples[s].labels[au]);
    }
    r.f1.push_back(f1_frame(pred, truth));
    r.accuracy.push_back(accuracy(pred, truth));
    try {
      r.auc.emplace_back(auc(score, truth));
    } catch (const UndefinedMetricError&) {
      r.auc.emplace_back(std::nullopt);
    }
  }
  for (std::size_t s = 0; s < samples.size(); ++s) {
    lp.push_back(predictions[s].landmarks);
    lt.push_back(samples[s].landmarks);
    d.push_back(samples[s].inter_ocular);
  }
  const auto mean = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  r.avg_f1 = mean(r.f1);
  r.avg_accuracy = mean(r.accuracy);
  std::vector<double> defined;
  for (const auto& a : r.auc)
    if (a) defined.push_back(*a);
  r.avg_auc = mean(defined);
  r.mean_landmark_error_pct = mean_landmark_error(lp, lt, d);
  return r;
}

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string fixed(double v, const char* fmt = "%.2f") {
  char buf[32];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

void write_report_csv(const std::filesystem::path& path, const MetricReport& r) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw InputError("cannot write " + path.string());
  os << "au,f1,accuracy,auc\n";
  for (std::size_t i = 0; i < r.aus(); ++i) {
    os << i + 1 << ',' << pct(r.f1[i]) << ',' << pct(r.accuracy[i]) << ',' << (r.auc[i] ? pct(*r.auc[i]) : "NA")
       << '\n';
  }
  os << "avg," << pct(r.avg_f1) << ',' << pct(r.avg_accuracy) << ',' << pct(r.avg_auc) << '\n';
  os << "mean_landmark_error_pct," << fixed(r.mean_landmark_error_pct, "%.4f") << ",,\n";
}

void print_report(std::ostream& os, const MetricReport& r) {
  os << "AU     F1(%)   Acc(%)  AUC(%)\n";
  for (std::size_t i = 0; i < r.aus(); ++i) {
    char line[96];
    std::snprintf(line, sizeof line, "%-5zu %7s %8s %7s\n", i + 1, pct(r.f1[i]).c_str(), pct(r.accuracy[i]).c_str(),
                  r.auc[i] ? pct(*r.auc[i]).c_str() : "NA");
    os << line;
  }
  char line[96];
  std::snprintf(line, sizeof line, "%-5s %7s %8s %7s\n", "Avg.", pct(r.avg_f1).c_str(), pct(r.avg_accuracy).c_str(),
                pct(r.avg_auc).c_str());
  os << line;
  bool excluded = false;
  for (std::size_t i = 0; i < r.aus(); ++i)
    if (!r.auc[i]) {
      if (!excluded) os << "AUC undefined (single-class truth), excluded from average: AU";
      os << ' ' << i + 1;
      excluded = true;
    }
  if (excluded) os << '\n';
  os << "Mean landmark error: " << fixed(r.mean_landmark_error_pct, "%.3f") << "%\n";
}

AblationTable ablation_report(const std::vector<AblationRow>& runs) {
  if (runs.size() < 2) throw InputError("ablation_report: need at least two runs");
  const std::size_t n = runs.front().report.aus();
  AblationTable t;
  for (const auto& run : runs) {
    if (run.report.aus() != n) throw InputError("ablation_report: runs disagree on the AU count");
    t.tags.push_back(run.tag);
    std::vector<double> row;
    for (double v : run.report.f1) row.push_back(100.0 * v);
    t.f1.push_back(std::move(row));
    t.avg_f1.push_back(100.0 * run.report.avg_f1);
    t.avg_accuracy.push_back(100.0 * run.report.avg_accuracy);
    t.avg_auc.push_back(100.0 * run.report.avg_auc);
  }
  for (double v : t.avg_f1) t.delta_avg_f1.push_back(v - t.avg_f1.front());
  return t;
}

void write_ablation_csv(const std::filesystem::path& path, const AblationTable& t) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw InputError("cannot write " + path.string());
  os << "config";
  for (std::size_t i = 0; i < (t.f1.empty() ? 0 : t.f1.front().size()); ++i) os << ",f1_au" << i + 1;
  os << ",avg_f1,delta_avg_f1,avg_acc,avg_auc\n";
  for (std::size_t r = 0; r < t.tags.size(); ++r) {
    os << t.tags[r];
    for (double v : t.f1[r]) os << ',' << fixed(v);
    os << ',' << fixed(t.avg_f1[r]) << ',' << fixed(t.delta_avg_f1[r], "%+.2f") << ',' << fixed(t.avg_accuracy[r])
       << ',' << fixed(t.avg_auc[r]) << '\n';
  }
}

void print_ablation(std::ostream& os, const AblationTable& t) {
  os << "config            ";
  for (std::size_t i = 0; i < (t.f1.empty() ? 0 : t.f1.front().size()); ++i) {
    char head[16];
    std::snprintf(head, sizeof head, " AU%-4zu", i + 1);
    os << head;
  }
  os << "   Avg.   delta\n";
  for (std::size_t r = 0; r < t.tags.size(); ++r) {
    char tag[32];
    std::snprintf(tag, sizeof tag, "%-18s", t.tags[r].c_str());
    os << tag;
    for (double v : t.f1[r]) os << ' ' << fixed(v, "%6.1f");
    os << ' ' << fixed(t.avg_f1[r], "%6.2f") << ' ' << fixed(t.delta_avg_f1[r], "%+7.2f") << '\n';
  }
}

}  // namespace mgrr::eval
