// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "avsr/nn/module.hpp"

namespace avsr::nn {

/// Detached copy of a module's parameters and buffers.
struct StateDict {
  std::vector<std::pair<std::string, Tensor>> entries;

  const Tensor* find(const std::string& name) const;
  std::size_t parameter_count() const;
};

/// Deep copy of every entry of `m`, in registration order.
StateDict state_dict(const Module& m);

/// Copies entries into `m` in place. Every entry of `m` must be present in
/// `dict` with an identical shape (CheckpointError otherwise); entries of
/// `dict` unknown to `m` are an error unless `allow_extra`.
void load_state_dict(Module& m, const StateDict& dict, bool allow_extra = false);

}  // namespace avsr::nn
