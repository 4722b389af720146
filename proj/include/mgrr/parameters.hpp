// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mgrr/autodiff.hpp"

namespace mgrr {

/// Owns every trainable tensor of a model in registration order. Pointers
/// returned by add() stay valid for the store's lifetime.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor value, bool decay = true);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;

  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const;
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }
  std::vector<std::string> names() const;

  void zero_grad();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) fill.
Tensor uniform_fan_in(Shape shape, std::size_t fan_in, std::mt19937_64& rng);

}  // namespace mgrr
