// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mgrr/error.hpp"
#include "mgrr/labels.hpp"
#include "mgrr/tensor.hpp"

namespace mgrr {

/// Conditional probability undefined for an AU column (no positives or no
/// negatives) and no smoothing to fall back on.
class DegenerateConditionalError : public InputError {
 public:
  using InputError::InputError;
};

struct PriorMatrix {
  std::size_t n = 0;
  Tensor p_cond;  // [n,n], P_ij = (P(a_i=1|a_j=1) + P(a_i=0|a_j=0)) / 2
  Tensor a_init;  // [n,n], |2 (P_ij - 0.5)|
  std::vector<double> occurrence;  // positive rate per AU
};

struct BalanceWeights {
  std::vector<double> w;
};

/// Coupling strength from an agreement probability: |(p - 0.5) * 2|.
inline double adjacency_from_agreement(double p) { return std::abs((p - 0.5) * 2.0); }

/// Counts co-activation and co-absence with additive smoothing on each joint
/// count. The diagonal is pinned to P_ii = A_ii = 1.
PriorMatrix compute_prior(const LabelMatrix& labels, double smoothing = 1.0);

/// Inverse-frequency weights rescaled to sum to n. AUs with no positives fall
/// back to the smoothed rate (pos + s) / (N + 2s).
BalanceWeights compute_balance_weights(const LabelMatrix& labels, double smoothing = 1.0);
BalanceWeights balance_weights_from_occurrence(std::span<const double> occurrence);

/// n x n CSV, 9 decimals, no header; row = target AU i.
void write_matrix_csv(const std::filesystem::path& path, const Tensor& m);
Tensor read_matrix_csv(const std::filesystem::path& path);

/// Stable FNV-1a hash of a_init, hex encoded. Recorded in checkpoints.
std::string prior_hash(const PriorMatrix& prior);

}  // namespace mgrr
