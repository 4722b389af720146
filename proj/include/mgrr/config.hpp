// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mgrr/data.hpp"
#include "mgrr/model.hpp"
#include "mgrr/train.hpp"

namespace mgrr {

enum class ConfigType { Int, Float, Bool, String };

struct ConfigKey {
  const char* name;
  ConfigType type;
  const char* default_value;
  const char* help;
};

/// Every recognised key with its default.
const std::vector<ConfigKey>& config_schema();

/// Flat `key = value` run description. Unknown keys and unparsable values are
/// rejected at set time.
class RunConfig {
 public:
  RunConfig();

  void set(const std::string& key, const std::string& value);
  /// Parses `key=value`.
  void set_assignment(const std::string& assignment);
  const std::string& get(const std::string& key) const;
  bool has(const std::string& key) const;

  void load_file(const std::filesystem::path& path);
  void load_text(const std::string& text, const std::string& origin = "<text>");
  void write_file(const std::filesystem::path& path) const;
  std::string to_text() const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  long long get_int(const std::string& key) const;
  double get_float(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  ModelConfig model() const;
  data::SynthSpec synth() const;
  train::TrainConfig training() const;
  double smoothing() const { return get_float("smoothing"); }
  double test_fraction() const { return get_float("test_fraction"); }

 private:
  std::map<std::string, std::string> values_;
};

// List-valued settings.
std::vector<double> parse_double_list(const std::string& text);
std::vector<data::Link> parse_links(const std::string& text);  // "child:parent:p;..."
std::vector<std::vector<std::size_t>> parse_anchors(const std::string& text);  // "2;5;8+9"

}  // namespace mgrr
