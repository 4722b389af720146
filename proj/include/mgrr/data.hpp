// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mgrr/labels.hpp"
#include "mgrr/model.hpp"
#include "mgrr/prior.hpp"

namespace mgrr::data {

/// Child AU drawn conditionally on an earlier parent AU.
struct Link {
  std::size_t child = 0;
  std::size_t parent = 0;
  double p_given_parent = 0.0;  // P(child = 1 | parent = 1)
};

/// Synthetic benchmark description. Labels come from a sequential chain: each
/// AU is either drawn from its marginal or conditioned on one predecessor,
/// with the off-state conditional chosen so every marginal is preserved.
struct SynthSpec {
  std::size_t aus = 12;
  std::size_t landmarks = 49;
  std::size_t image_size = 176;
  std::size_t image_channels = 1;
  std::vector<double> marginals;  // empty = 0.3 for every AU
  std::vector<Link> links;
  std::vector<std::vector<std::size_t>> au_anchors;  // empty = default_anchors
  double landmark_jitter = 1.0;  // pixels, per coordinate
  double blob_amplitude = 1.0;
  double blob_sigma = 2.0;       // pixels
  double noise_level = 0.1;
  double base_level = 0.2;       // template intensity inside the face oval
  std::size_t sample_count = 64;
  std::uint64_t seed = 0;

  /// Throws SpecError for invalid settings or infeasible conditionals.
  void validate() const;
  std::vector<double> resolved_marginals() const;
  std::vector<std::vector<std::size_t>> resolved_anchors() const;
  /// P(a_i = 1 | a_child's parent) for the off state of every linked AU.
  double off_conditional(const Link& link) const;
};

/// Template landmark layout in pixels [x1, y1, ...]; indices 0 and 1 are the eyes.
std::vector<double> template_landmarks(std::size_t landmarks, std::size_t image_size);

/// Exact label statistics implied by the chain (enumerates all 2^n states).
/// p_cond / a_init follow the same definitions as compute_prior.
PriorMatrix planted_prior(const SynthSpec& spec);
/// Exact P(a_i = 1 | a_j = 1) matrix implied by the chain.
Tensor planted_cooccurrence(const SynthSpec& spec);

struct Dataset {
  std::size_t aus = 0;
  std::size_t landmarks = 0;
  std::size_t image_size = 0;
  std::size_t image_channels = 1;
  std::vector<SampleRecord> samples;

  LabelMatrix labels() const;
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

Dataset generate(const SynthSpec& spec);
/// Draws only the label chain (no images); used for large-N statistics.
LabelMatrix sample_labels(const SynthSpec& spec, std::size_t count, std::uint64_t seed);

/// Seeded disjoint train/test split; `test_fraction` of the samples go to test.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t count, double test_fraction,
                                                                          std::uint64_t seed);

// On-disk layout: manifest.json, labels.csv, landmarks.csv, images/<id>.mgt
void write_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& dir);

/// Landmarks CSV: `sample_id, x_1, y_1, ..., x_m, y_m, d_o`.
struct LandmarkTable {
  std::vector<std::string> sample_ids;
  std::vector<std::vector<double>> coords;
  std::vector<double> inter_ocular;
};
void write_landmarks_csv(const std::filesystem::path& path, const Dataset& ds);
/// `image_size` > 0 enables the in-bounds check.
LandmarkTable read_landmarks_csv(const std::filesystem::path& path, std::size_t image_size = 0);

}  // namespace mgrr::data
