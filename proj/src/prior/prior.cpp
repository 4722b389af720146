// SPDX-License-Identifier: Apache-2.0

#include "mgrr/prior.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "common/csv.hpp"

namespace mgrr {

PriorMatrix compute_prior(const LabelMatrix& labels, double smoothing) {
  if (labels.samples == 0 || labels.aus == 0) throw InputError("compute_prior: empty label set");
  if (smoothing < 0.0) throw InputError("compute_prior: smoothing must be non-negative");
  const std::size_t n = labels.aus, N = labels.samples;

  std::vector<double> pos(n, 0.0);
  // both[i][j] = #(a_i=1, a_j=1); neither[i][j] = #(a_i=0, a_j=0)
  std::vector<double> both(n * n, 0.0), neither(n * n, 0.0);
  for (std::size_t s = 0; s < N; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      const bool ai = labels(s, i);
      pos[i] += ai;
      for (std::size_t j = 0; j < n; ++j) {
        const bool aj = labels(s, j);
        both[i * n + j] += (ai && aj);
        neither[i * n + j] += (!ai && !aj);
      }
    }
  }

  PriorMatrix prior;
  prior.n = n;
  prior.p_cond = Tensor({n, n});
  prior.a_init = Tensor({n, n});
  prior.occurrence.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double pos_j = pos[j], neg_j = static_cast<double>(N) - pos[j];
    if (smoothing == 0.0 && (pos_j == 0.0 || neg_j == 0.0)) {
      throw DegenerateConditionalError("AU " + std::to_string(j + 1) +
                                       (pos_j == 0.0 ? " never occurs" : " never absent") +
                                       "; conditional probability undefined without smoothing");
    }
    for (std::size_t i = 0; i < n; ++i) {
      double p;
      if (i == j) {
        p = 1.0;
      } else {
        const double on = (both[i * n + j] + smoothing) / (pos_j + 2.0 * smoothing);
        const double off = (neither[i * n + j] + smoothing) / (neg_j + 2.0 * smoothing);
        p = 0.5 * (on + off);
      }
      prior.p_cond.at(i, j) = p;
      prior.a_init.at(i, j) = adjacency_from_agreement(p);
    }
  }
  for (std::size_t i = 0; i < n; ++i) prior.occurrence[i] = pos[i] / static_cast<double>(N);
  return prior;
}

BalanceWeights balance_weights_from_occurrence(std::span<const double> occurrence) {
  if (occurrence.empty()) throw InputError("balance weights: no AUs");
  BalanceWeights bw;
  bw.w.resize(occurrence.size());
  double total = 0.0;
  for (std::size_t i = 0; i < occurrence.size(); ++i) {
    if (!(occurrence[i] > 0.0)) throw InputError("balance weights: occurrence must be positive");
    bw.w[i] = 1.0 / occurrence[i];
    total += bw.w[i];
  }
  const double rescale = static_cast<double>(occurrence.size()) / total;
  for (auto& v : bw.w) v *= rescale;
  return bw;
}

BalanceWeights compute_balance_weights(const LabelMatrix& labels, double smoothing) {
  if (labels.samples == 0 || labels.aus == 0) throw InputError("compute_balance_weights: empty label set");
  const double N = static_cast<double>(labels.samples);
  std::vector<double> rate(labels.aus, 0.0);
  for (std::size_t s = 0; s < labels.samples; ++s)
    for (std::size_t i = 0; i < labels.aus; ++i) rate[i] += labels(s, i);
  for (auto& r : rate) {
    if (r == 0.0) {
      if (smoothing <= 0.0) throw DegenerateConditionalError("an AU has no positives and smoothing is 0");
      r = smoothing / (N + 2.0 * smoothing);
    } else {
      r /= N;
    }
  }
  return balance_weights_from_occurrence(rate);
}

void write_matrix_csv(const std::filesystem::path& path, const Tensor& m) {
  if (m.rank() != 2) throw DimensionError("write_matrix_csv: matrix expected");
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw InputError("cannot write " + path.string());
  char buf[64];
  for (std::size_t i = 0; i < m.dim(0); ++i) {
    for (std::size_t j = 0; j < m.dim(1); ++j) {
      std::snprintf(buf, sizeof buf, "%.9f", m.at(i, j));
      if (j) os << ',';
      os << buf;
    }
    os << '\n';
  }
}

Tensor read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open " + path.string());
  std::vector<double> data;
  std::size_t cols = 0, rows = 0, lineno = 0;
  std::string line;
  while (std::getline(is, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const auto cells = csv::split(line);
    if (rows == 0) cols = cells.size();
    if (cells.size() != cols) throw ParseError(path.string() + ": ragged matrix row", lineno);
    for (const auto& c : cells) {
      auto v = csv::parse_double(c);
      if (!v) throw ParseError(path.string() + ": not a number '" + c + "'", lineno);
      data.push_back(*v);
    }
    ++rows;
  }
  if (rows == 0) throw ParseError(path.string() + ": empty matrix");
  return Tensor({rows, cols}, std::move(data));
}

std::string prior_hash(const PriorMatrix& prior) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(prior.a_init.data().data());
  for (std::size_t i = 0; i < prior.a_init.numel() * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mgrr
