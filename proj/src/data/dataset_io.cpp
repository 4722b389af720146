// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <fstream>

#include "common/csv.hpp"
#include "json.hpp"
#include "mgrr/data.hpp"
#include "mgrr/error.hpp"
#include "mgrr/tensor_io.hpp"

namespace mgrr::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string format_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_landmarks_csv(const fs::path& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw InputError("cannot write " + path.string());
  os << "sample_id";
  for (std::size_t k = 1; k <= ds.landmarks; ++k) os << ",x_" << k << ",y_" << k;
  os << ",d_o\n";
  for (const auto& s : ds.samples) {
    os << s.id;
    for (double v : s.landmarks) os << ',' << format_exact(v);
    os << ',' << format_exact(s.inter_ocular) << '\n';
  }
}

LandmarkTable read_landmarks_csv(const fs::path& path, std::size_t image_size) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open landmarks file " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw ParseError(path.string() + ": missing header", 1);
  const auto header = csv::split(line);
  if (header.size() < 4 || header.front() != "sample_id" || header.back() != "d_o" || (header.size() - 2) % 2 != 0) {
    throw ParseError(path.string() + ": header must be sample_id, x_1, y_1, ..., x_m, y_m, d_o", 1);
  }
  const std::size_t m = (header.size() - 2) / 2;
  for (std::size_t k = 0; k < m; ++k) {
    if (header[1 + 2 * k] != "x_" + std::to_string(k + 1) || header[2 + 2 * k] != "y_" + std::to_string(k + 1)) {
      throw ParseError(path.string() + ": unexpected landmark column '" + header[1 + 2 * k] + "'", 1);
    }
  }
  LandmarkTable table;
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
    std::vector<double> coords;
    for (std::size_t k = 1; k + 1 < cells.size(); ++k) {
      const auto v = csv::parse_double(cells[k]);
      if (!v) throw ParseError(path.string() + ": bad coordinate '" + cells[k] + "'", lineno);
      if (image_size && (*v < 0.0 || *v > static_cast<double>(image_size - 1))) {
        throw ParseError(path.string() + ": coordinate " + cells[k] + " outside the image", lineno);
      }
      coords.push_back(*v);
    }
    const auto d = csv::parse_double(cells.back());
    if (!d || !(*d > 0.0)) throw ParseError(path.string() + ": inter-ocular distance must be positive", lineno);
    table.sample_ids.push_back(cells[0]);
    table.coords.push_back(std::move(coords));
    table.inter_ocular.push_back(*d);
  }
  return table;
}

void write_dataset(const fs::path& dir, const Dataset& ds) {
  fs::create_directories(dir / "images");
  write_labels_csv(dir / "labels.csv", ds.labels());
  write_landmarks_csv(dir / "landmarks.csv", ds);
  json index = json::array();
  for (const auto& s : ds.samples) {
    const auto rel = "images/" + s.id + ".mgt";
    save_tensor(dir / rel, s.image);
    index.push_back({{"id", s.id}, {"image", rel}});
  }
  json manifest = {{"format", "mgrr-dataset"},
                   {"version", 1},
                   {"aus", ds.aus},
                   {"landmarks", ds.landmarks},
                   {"image_size", ds.image_size},
                   {"image_channels", ds.image_channels},
                   {"labels", "labels.csv"},
                   {"landmark_file", "landmarks.csv"},
                   {"samples", index}};
  std::ofstream os(dir / "manifest.json", std::ios::trunc);
  if (!os) throw InputError("cannot write dataset manifest in " + dir.string());
  os << manifest.dump(2) << '\n';
}

Dataset read_dataset(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw InputError("no dataset manifest in " + dir.string());
  json manifest;
  try {
    is >> manifest;
  } catch (const json::exception& e) {
    throw ParseError((dir / "manifest.json").string() + ": " + e.what());
  }
  Dataset ds;
  try {
    if (manifest.at("format") != "mgrr-dataset") throw ManifestError("not a dataset manifest: " + dir.string());
    ds.aus = manifest.at("aus").get<std::size_t>();
    ds.landmarks = manifest.at("landmarks").get<std::size_t>();
    ds.image_size = manifest.at("image_size").get<std::size_t>();
    ds.image_channels = manifest.at("image_channels").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ManifestError(dir.string() + ": incomplete dataset manifest (" + e.what() + ")");
  }
  const auto labels = read_labels_csv(dir / manifest.value("labels", "labels.csv"));
  const auto marks = read_landmarks_csv(dir / manifest.value("landmark_file", "landmarks.csv"), ds.image_size);
  if (labels.aus != ds.aus) throw ManifestError("labels.csv AU count disagrees with the manifest");
  const auto& index = manifest.at("samples");
  if (labels.samples != index.size() || marks.sample_ids.size() != index.size()) {
    throw ManifestError("sample counts differ between manifest, labels and landmarks");
  }
  for (std::size_t s = 0; s < index.size(); ++s) {
    SampleRecord rec;
    rec.id = index[s].at("id").get<std::string>();
    if (labels.sample_ids[s] != rec.id || marks.sample_ids[s] != rec.id) {
      throw ManifestError("sample order differs between manifest and CSV files at " + rec.id);
    }
    if (marks.coords[s].size() != 2 * ds.landmarks) throw ManifestError("landmark count disagrees with the manifest");
    rec.image = load_tensor(dir / index[s].at("image").get<std::string>());
    if (rec.image.shape() != Shape{ds.image_channels, ds.image_size, ds.image_size}) {
      throw ManifestError("image " + rec.id + " has shape " + shape_str(rec.image.shape()));
    }
    rec.labels.assign(labels.values.begin() + s * ds.aus, labels.values.begin() + (s + 1) * ds.aus);
    rec.landmarks = marks.coords[s];
    rec.inter_ocular = marks.inter_ocular[s];
    ds.samples.push_back(std::move(rec));
  }
  return ds;
}

}  // namespace mgrr::data
