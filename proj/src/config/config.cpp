// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <fstream>
#include <sstream>

#include "common/csv.hpp"
#include "mgrr/config.hpp"
#include "mgrr/error.hpp"

namespace mgrr {

const std::vector<ConfigKey>& config_schema() {
  using T = ConfigType;
  static const std::vector<ConfigKey> schema = {
      // network
      {"aus", T::Int, "12", "number of action units n"},
      {"landmarks", T::Int, "49", "number of landmarks m"},
      {"layers", T::Int, "2", "reasoning layers K"},
      {"heads", T::Int, "8", "attention heads L"},
      {"attn_width", T::Int, "1024", "attention projection width D"},
      {"feature_width", T::Int, "64", "AU feature width F"},
      {"channels", T::Int, "64", "global map channels c"},
      {"map_size", T::Int, "44", "global map extent w = h"},
      {"image_size", T::Int, "176", "input image extent"},
      {"image_channels", T::Int, "1", "input image channels"},
      {"patch_radius", T::Int, "1", "half-extent of AU patches in map units"},
      {"align_width", T::Int, "64", "hidden width of the alignment head"},
      {"align_weight", T::Float, "0.5", "lambda, weight of the alignment loss"},
      {"au_anchors", T::String, "", "landmark anchors per AU, e.g. 2;5;8+9 (empty = spread)"},
      {"enable_dg", T::Bool, "true", "learnable AU graph"},
      {"enable_og", T::Bool, "true", "original global map at fusion"},
      {"enable_cg", T::Bool, "true", "channel attention branch"},
      {"enable_pg", T::Bool, "true", "pixel attention branch"},
      // synthetic data
      {"sample_count", T::Int, "64", "generated samples"},
      {"marginals", T::String, "", "per-AU marginals, comma separated (empty = 0.3)"},
      {"links", T::String, "", "planted links child:parent:P(child|parent);..."},
      {"landmark_jitter", T::Float, "1", "landmark jitter sigma in pixels"},
      {"blob_amplitude", T::Float, "1", "intensity of an active AU blob"},
      {"blob_sigma", T::Float, "2", "blob width in pixels"},
      {"noise_level", T::Float, "0.1", "additive pixel noise sigma"},
      {"base_level", T::Float, "0.2", "face template intensity"},
      {"data_seed", T::Int, "0", "seed of generation and the train/test split"},
      {"test_fraction", T::Float, "0.2", "held-out fraction"},
      {"smoothing", T::Float, "1", "Laplace smoothing of the co-occurrence prior"},
      // optimisation
      {"seed", T::Int, "0", "seed of initialisation and batch order"},
      {"epochs", T::Int, "15", "training epochs"},
      {"batch_size", T::Int, "8", "samples per step"},
      {"lr", T::Float, "0.01", "initial learning rate"},
      {"lr_decay", T::Float, "0.5", "learning rate decay factor"},
      {"decay_every", T::Int, "2", "epochs between decays"},
      {"momentum", T::Float, "0.9", "momentum"},
      {"nesterov", T::Bool, "true", "Nesterov momentum"},
      {"weight_decay", T::Float, "0.0005", "L2 weight decay (not applied to adjacency)"},
      {"threads", T::Int, "1", "worker threads for per-sample gradients"},
  };
  return schema;
}

namespace {

const ConfigKey* lookup(const std::string& key) {
  for (const auto& k : config_schema())
    if (key == k.name) return &k;
  return nullptr;
}

std::optional<bool> parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  return std::nullopt;
}

std::size_t as_size(long long v, const std::string& key) {
  if (v < 0) throw SpecError(key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : config_schema()) values_[k.name] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& raw) {
  const auto* k = lookup(key);
  if (!k) throw SpecError("unknown config key '" + key + "'");
  const std::string value(csv::trim(raw));
  switch (k->type) {
    case ConfigType::Int:
      if (!csv::parse_int(value)) throw SpecError(key + ": expected an integer, got '" + value + "'");
      break;
    case ConfigType::Float:
      if (!csv::parse_double(value)) throw SpecError(key + ": expected a number, got '" + value + "'");
      break;
    case ConfigType::Bool:
      if (!parse_bool(value)) throw SpecError(key + ": expected true or false, got '" + value + "'");
      break;
    case ConfigType::String:
      break;
  }
  // validate list syntax eagerly
  if (key == "marginals") parse_double_list(value);
  if (key == "links") parse_links(value);
  if (key == "au_anchors") parse_anchors(value);
  values_[key] = value;
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw SpecError("expected key=value, got '" + assignment + "'");
  set(std::string(csv::trim(std::string_view(assignment).substr(0, eq))), assignment.substr(eq + 1));
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw SpecError("unknown config key '" + key + "'");
  return it->second;
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) != 0; }

void RunConfig::load_text(const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (csv::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(origin + ": expected 'key = value'", lineno);
    try {
      set(std::string(csv::trim(std::string_view(line).substr(0, eq))), line.substr(eq + 1));
    } catch (const SpecError& e) {
      throw ParseError(origin + ": " + e.what(), lineno);
    }
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open config " + path.string());
  std::stringstream buf;
  buf << is.rdbuf();
  load_text(buf.str(), path.string());
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  for (const auto& k : config_schema()) os << k.name << " = " << values_.at(k.name) << '\n';
  return os.str();
}

void RunConfig::write_file(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw InputError("cannot write " + path.string());
  os << to_text();
}

long long RunConfig::get_int(const std::string& key) const {
  const auto v = csv::parse_int(get(key));
  if (!v) throw SpecError(key + " is not an integer");
  return *v;
}

double RunConfig::get_float(const std::string& key) const {
  const auto v = csv::parse_double(get(key));
  if (!v) throw SpecError(key + " is not a number");
  return *v;
}

bool RunConfig::get_bool(const std::string& key) const {
  const auto v = parse_bool(get(key));
  if (!v) throw SpecError(key + " is not a boolean");
  return *v;
}

ModelConfig RunConfig::model() const {
  ModelConfig m;
  m.aus = as_size(get_int("aus"), "aus");
  m.landmarks = as_size(get_int("landmarks"), "landmarks");
  m.layers = as_size(get_int("layers"), "layers");
  m.heads = as_size(get_int("heads"), "heads");
  m.attn_width = as_size(get_int("attn_width"), "attn_width");
  m.feature_width = as_size(get_int("feature_width"), "feature_width");
  m.channels = as_size(get_int("channels"), "channels");
  m.map_size = as_size(get_int("map_size"), "map_size");
  m.image_size = as_size(get_int("image_size"), "image_size");
  m.image_channels = as_size(get_int("image_channels"), "image_channels");
  m.patch_radius = as_size(get_int("patch_radius"), "patch_radius");
  m.align_width = as_size(get_int("align_width"), "align_width");
  m.align_weight = get_float("align_weight");
  m.au_anchors = parse_anchors(get("au_anchors"));
  m.enable_dg = get_bool("enable_dg");
  m.enable_og = get_bool("enable_og");
  m.enable_cg = get_bool("enable_cg");
  m.enable_pg = get_bool("enable_pg");
  return m;
}

data::SynthSpec RunConfig::synth() const {
  data::SynthSpec s;
  s.aus = as_size(get_int("aus"), "aus");
  s.landmarks = as_size(get_int("landmarks"), "landmarks");
  s.image_size = as_size(get_int("image_size"), "image_size");
  s.image_channels = as_size(get_int("image_channels"), "image_channels");
  s.marginals = parse_double_list(get("marginals"));
  s.links = parse_links(get("links"));
  s.au_anchors = parse_anchors(get("au_anchors"));
  s.landmark_jitter = get_float("landmark_jitter");
  s.blob_amplitude = get_float("blob_amplitude");
  s.blob_sigma = get_float("blob_sigma");
  s.noise_level = get_float("noise_level");
  s.base_level = get_float("base_level");
  s.sample_count = as_size(get_int("sample_count"), "sample_count");
  s.seed = static_cast<std::uint64_t>(get_int("data_seed"));
  return s;
}

train::TrainConfig RunConfig::training() const {
  train::TrainConfig t;
  t.optimizer.lr = get_float("lr");
  t.optimizer.momentum = get_float("momentum");
  t.optimizer.nesterov = get_bool("nesterov");
  t.optimizer.weight_decay = get_float("weight_decay");
  t.optimizer.lr_decay = get_float("lr_decay");
  t.optimizer.decay_every = as_size(get_int("decay_every"), "decay_every");
  t.epochs = as_size(get_int("epochs"), "epochs");
  t.batch_size = as_size(get_int("batch_size"), "batch_size");
  t.seed = static_cast<std::uint64_t>(get_int("seed"));
  t.threads = std::max<std::size_t>(1, as_size(get_int("threads"), "threads"));
  return t;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  if (csv::trim(text).empty()) return out;
  for (const auto& cell : csv::split(text, ',')) {
    const auto v = csv::parse_double(cell);
    if (!v) throw SpecError("bad number '" + cell + "' in list");
    out.push_back(*v);
  }
  return out;
}

std::vector<data::Link> parse_links(const std::string& text) {
  std::vector<data::Link> out;
  if (csv::trim(text).empty()) return out;
  for (const auto& item : csv::split(text, ';')) {
    if (item.empty()) continue;
    const auto parts = csv::split(item, ':');
    if (parts.size() != 3) throw SpecError("link '" + item + "' must be child:parent:probability");
    const auto c = csv::parse_int(parts[0]);
    const auto p = csv::parse_int(parts[1]);
    const auto q = csv::parse_double(parts[2]);
    if (!c || !p || !q || *c < 0 || *p < 0) throw SpecError("bad link '" + item + "'");
    out.push_back({static_cast<std::size_t>(*c), static_cast<std::size_t>(*p), *q});
  }
  return out;
}

std::vector<std::vector<std::size_t>> parse_anchors(const std::string& text) {
  std::vector<std::vector<std::size_t>> out;
  if (csv::trim(text).empty()) return out;
  for (const auto& item : csv::split(text, ';')) {
    std::vector<std::size_t> group;
    for (const auto& idx : csv::split(item, '+')) {
      const auto v = csv::parse_int(idx);
      if (!v || *v < 0) throw SpecError("bad anchor '" + idx + "'");
      group.push_back(static_cast<std::size_t>(*v));
    }
    out.push_back(std::move(group));
  }
  return out;
}

}  // namespace mgrr
