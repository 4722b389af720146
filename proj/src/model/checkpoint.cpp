// SPDX-License-Identifier: Apache-2.0

#include <fstream>

#include "json.hpp"
#include "mgrr/checkpoint.hpp"
#include "mgrr/error.hpp"
#include "mgrr/tensor_io.hpp"

namespace mgrr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "mgrr-checkpoint";

std::string file_for(const std::string& name) { return name + ".mgt"; }

}  // namespace

void save_checkpoint(const fs::path& dir, const RunConfig& config, const Model& model,
                     const train::NesterovSgd* optimizer, std::size_t epoch, const PriorMatrix& prior,
                     const BalanceWeights& weights) {
  fs::create_directories(dir / "params");
  fs::create_directories(dir / "prior");
  if (optimizer) fs::create_directories(dir / "momentum");
  json params = json::array();
  const auto& store = model.params();
  for (std::size_t k = 0; k < store.size(); ++k) {
    const auto& p = store[k];
    save_tensor(dir / "params" / file_for(p.name), p.value);
    if (optimizer) save_tensor(dir / "momentum" / file_for(p.name), optimizer->momentum().at(k));
    params.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"decay", p.decay}});
  }
  save_tensor(dir / "prior" / "p_cond.mgt", prior.p_cond);
  save_tensor(dir / "prior" / "a_init.mgt", prior.a_init);
  write_matrix_csv(dir / "prior.csv", prior.a_init);

  json cfg = json::object();
  for (const auto& [k, v] : config.values()) cfg[k] = v;
  const json manifest = {{"format", kFormat},
                         {"version", 1},
                         {"epoch", epoch},
                         {"config", cfg},
                         {"prior_hash", prior_hash(prior)},
                         {"occurrence", prior.occurrence},
                         {"balance_weights", weights.w},
                         {"has_momentum", optimizer != nullptr},
                         {"parameters", params}};
  std::ofstream os(dir / "manifest.json", std::ios::trunc);
  if (!os) throw InputError("cannot write checkpoint manifest in " + dir.string());
  os << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw InputError("no checkpoint manifest in " + dir.string());
  json manifest;
  try {
    is >> manifest;
  } catch (const json::exception& e) {
    throw ParseError((dir / "manifest.json").string() + ": " + e.what());
  }
  Checkpoint ck;
  try {
    if (manifest.at("format") != kFormat) throw ManifestError(dir.string() + " is not a checkpoint");
    ck.epoch = manifest.at("epoch").get<std::size_t>();
    for (const auto& [k, v] : manifest.at("config").items()) ck.config.set(k, v.get<std::string>());
    ck.weights.w = manifest.at("balance_weights").get<std::vector<double>>();
    ck.prior.occurrence = manifest.at("occurrence").get<std::vector<double>>();
    ck.prior.p_cond = load_tensor(dir / "prior" / "p_cond.mgt");
    ck.prior.a_init = load_tensor(dir / "prior" / "a_init.mgt");
    ck.prior.n = ck.prior.a_init.shape()[0];
    if (prior_hash(ck.prior) != manifest.at("prior_hash").get<std::string>()) {
      throw ManifestError("prior tensors in " + dir.string() + " do not match the recorded hash");
    }
    const bool has_momentum = manifest.value("has_momentum", false);
    for (const auto& entry : manifest.at("parameters")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      auto value = load_tensor(dir / "params" / file_for(name));
      if (value.shape() != shape) throw ManifestError("parameter " + name + " does not match its recorded shape");
      ck.params.emplace(name, std::move(value));
      if (has_momentum) ck.momentum.emplace(name, load_tensor(dir / "momentum" / file_for(name)));
    }
  } catch (const json::exception& e) {
    throw ManifestError(dir.string() + ": incomplete checkpoint manifest (" + e.what() + ")");
  } catch (const SpecError& e) {
    throw ManifestError(dir.string() + ": bad stored config (" + e.what() + ")");
  }
  return ck;
}

void restore_parameters(const Checkpoint& ckpt, Model& model) {
  auto& store = model.params();
  if (store.size() != ckpt.params.size()) {
    throw ManifestError("checkpoint holds " + std::to_string(ckpt.params.size()) + " parameters, model expects " +
                        std::to_string(store.size()));
  }
  for (auto& p : store) {
    const auto it = ckpt.params.find(p->name);
    if (it == ckpt.params.end()) throw ManifestError("checkpoint lacks parameter " + p->name);
    if (it->second.shape() != p->value.shape()) {
      throw ManifestError("parameter " + p->name + " has shape " + shape_str(it->second.shape()) +
                          " in the checkpoint, model expects " + shape_str(p->value.shape()));
    }
    p->value = it->second;
  }
}

void restore_momentum(const Checkpoint& ckpt, const Model& model, train::NesterovSgd& optimizer) {
  if (ckpt.momentum.empty()) return;
  const auto& store = model.params();
  for (std::size_t k = 0; k < store.size(); ++k) {
    const auto it = ckpt.momentum.find(store[k].name);
    if (it == ckpt.momentum.end() || it->second.shape() != store[k].value.shape()) {
      throw ManifestError("momentum for " + store[k].name + " missing or mis-shaped");
    }
    optimizer.momentum().at(k) = it->second;
  }
}

}  // namespace mgrr
