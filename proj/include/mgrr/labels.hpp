// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mgrr {

/// N x n binary AU labels, row per sample.
struct LabelMatrix {
  std::size_t samples = 0;
  std::size_t aus = 0;
  std::vector<std::string> sample_ids;
  std::vector<std::uint8_t> values;  // row-major, 0/1

  std::uint8_t operator()(std::size_t s, std::size_t au) const { return values[s * aus + au]; }
  std::uint8_t& operator()(std::size_t s, std::size_t au) { return values[s * aus + au]; }
};

// Labels CSV: header `sample_id,au_1,...,au_n`, then one 0/1 row per sample.
LabelMatrix read_labels_csv(const std::filesystem::path& path);
void write_labels_csv(const std::filesystem::path& path, const LabelMatrix& labels);

}  // namespace mgrr
