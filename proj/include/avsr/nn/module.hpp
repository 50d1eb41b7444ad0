// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "avsr/ad/tensor.hpp"

namespace avsr::nn {

using ad::Shape;
using ad::Tensor;

/// Optimizer group a parameter belongs to.
enum class ParamGroup { kBase, kAttention };

/// One entry of a module's persistent state.
struct StateEntry {
  std::string name;  // dotted path from the root module
  Tensor tensor;
  bool is_buffer = false;  // running statistics; never optimized
  ParamGroup group = ParamGroup::kBase;
};

/// Parameter container with a dotted naming tree. Modules register their
/// tensors and children at construction and are neither copyable nor
/// movable, so registered child pointers stay valid.
class Module {
 public:
  Module() = default;
  virtual ~Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;

  /// Parameters and buffers in registration order, names prefixed.
  std::vector<StateEntry> state(const std::string& prefix = "") const;
  /// Trainable parameters only (buffers excluded).
  std::vector<StateEntry> parameters(const std::string& prefix = "") const;

  /// Training mode drives batchnorm statistics; applies recursively.
  void set_training(bool on);
  bool training() const { return training_; }

  /// A frozen module keeps its parameters out of the gradient graph and
  /// runs batchnorm on running statistics. Applies recursively.
  void set_frozen(bool on);
  bool frozen() const { return frozen_; }

  /// Batchnorm layers consult this: training and not frozen.
  bool updates_statistics() const { return training_ && !frozen_; }

  std::size_t parameter_count() const;

 protected:
  Tensor& register_parameter(const std::string& name, Tensor t,
                             ParamGroup group = ParamGroup::kBase);
  Tensor& register_buffer(const std::string& name, Tensor t);
  void register_module(const std::string& name, Module& child);

 private:
  struct Slot {
    std::string name;
    Tensor tensor;
    bool is_buffer;
    ParamGroup group;
  };
  std::vector<Slot> slots_;
  std::vector<std::pair<std::string, Module*>> children_;
  bool training_ = true;
  bool frozen_ = false;
};

}  // namespace avsr::nn
