// SPDX-License-Identifier: Apache-2.0

#include "mgrr/labels.hpp"

#include <fstream>

#include "common/csv.hpp"
#include "mgrr/error.hpp"

namespace mgrr {

LabelMatrix read_labels_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open labels file " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw ParseError(path.string() + ": missing header", 1);
  const auto header = csv::split(line);
  if (header.size() < 2 || header[0] != "sample_id") {
    throw ParseError(path.string() + ": header must start with sample_id followed by AU columns", 1);
  }
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (header[j] != "au_" + std::to_string(j)) {
      throw ParseError(path.string() + ": expected column au_" + std::to_string(j) + ", got '" + header[j] + "'", 1);
    }
  }
  LabelMatrix labels;
  labels.aus = header.size() - 1;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const auto cells = csv::split(line);
    if (cells.size() != header.size()) {
      throw ParseError(path.string() + ": expected " + std::to_string(header.size()) + " columns, got " +
                           std::to_string(cells.size()),
                       lineno);
    }
    labels.sample_ids.push_back(cells[0]);
    for (std::size_t j = 1; j < cells.size(); ++j) {
      if (cells[j] != "0" && cells[j] != "1") {
        throw ParseError(path.string() + ": label value '" + cells[j] + "' is not 0/1", lineno);
      }
      labels.values.push_back(cells[j] == "1" ? 1 : 0);
    }
    ++labels.samples;
  }
  return labels;
}

void write_labels_csv(const std::filesystem::path& path, const LabelMatrix& labels) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw InputError("cannot write " + path.string());
  os << "sample_id";
  for (std::size_t j = 1; j <= labels.aus; ++j) os << ",au_" << j;
  os << '\n';
  for (std::size_t s = 0; s < labels.samples; ++s) {
    os << (s < labels.sample_ids.size() ? labels.sample_ids[s] : std::to_string(s));
    for (std::size_t j = 0; j < labels.aus; ++j) os << ',' << int(labels(s, j));
    os << '\n';
  }
}

}  // namespace mgrr
