// SPDX-License-Identifier: Apache-2.0
#include "avsr/nn/state_dict.hpp"

#include <algorithm>
#include <set>

#include "avsr/core/error.hpp"

namespace avsr::nn {

const Tensor* StateDict::find(const std::string& name) const {
  for (const auto& [n, t] : entries) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::size_t StateDict::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries) n += t.size();
  return n;
}

StateDict state_dict(const Module& m) {
  StateDict d;
  for (const auto& e : m.state()) d.entries.emplace_back(e.name, e.tensor.clone());
  return d;
}

void load_state_dict(Module& m, const StateDict& dict, bool allow_extra) {
  std::set<std::string> used;
  for (auto& e : m.state()) {
    const Tensor* src = dict.find(e.name);
    if (src == nullptr) throw CheckpointError("checkpoint is missing '" + e.name + "'");
    if (src->shape() != e.tensor.shape()) {
      throw CheckpointError("checkpoint entry '" + e.name + "' has shape " +
                            ad::shape_str(src->shape()) + ", model expects " +
                            ad::shape_str(e.tensor.shape()));
    }
    std::copy(src->data().begin(), src->data().end(), e.tensor.mutable_data().begin());
    used.insert(e.name);
  }
  if (!allow_extra) {
    for (const auto& [name, t] : dict.entries) {
      if (!used.count(name)) throw CheckpointError("checkpoint entry '" + name + "' is not in the model");
    }
  }
}

}  // namespace avsr::nn
