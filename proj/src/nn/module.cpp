// SPDX-License-Identifier: Apache-2.0
#include "avsr/nn/module.hpp"

#include <deque>

namespace avsr::nn {

std::vector<StateEntry> Module::state(const std::string& prefix) const {
  std::vector<StateEntry> out;
  for (const auto& s : slots_) {
    out.push_back(StateEntry{prefix + s.name, s.tensor, s.is_buffer, s.group});
  }
  for (const auto& [name, child] : children_) {
    auto sub = child->state(prefix + name + ".");
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

std::vector<StateEntry> Module::parameters(const std::string& prefix) const {
  std::vector<StateEntry> out;
  for (auto& e : state(prefix)) {
    if (!e.is_buffer) out.push_back(std::move(e));
  }
  return out;
}

void Module::set_training(bool on) {
  training_ = on;
  for (auto& [name, child] : children_) child->set_training(on);
}

void Module::set_frozen(bool on) {
  frozen_ = on;
  for (auto& s : slots_) {
    if (!s.is_buffer) s.tensor.set_requires_grad(!on);
  }
  for (auto& [name, child] : children_) child->set_frozen(on);
}

std::size_t Module::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : parameters()) n += e.tensor.size();
  return n;
}

Tensor& Module::register_parameter(const std::string& name, Tensor t, ParamGroup group) {
  t.set_requires_grad(!frozen_);
  slots_.push_back(Slot{name, std::move(t), false, group});
  return slots_.back().tensor;
}

Tensor& Module::register_buffer(const std::string& name, Tensor t) {
  slots_.push_back(Slot{name, std::move(t), true, ParamGroup::kBase});
  return slots_.back().tensor;
}

void Module::register_module(const std::string& name, Module& child) {
  children_.emplace_back(name, &child);
}

}  // namespace avsr::nn
