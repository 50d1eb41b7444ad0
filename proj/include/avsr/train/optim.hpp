// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <string>
#include <vector>

#include "avsr/nn/module.hpp"

namespace avsr::train {

using ad::Tensor;

/// Learning rate per parameter group.
struct GroupRates {
  double base = 1e-4;
  double attention = 2e-4;

  GroupRates scaled(double f) const { return {base * f, attention * f}; }
};

/// Bias-corrected Adam over a fixed parameter set. Moments are kept per
/// parameter; the step count is shared.
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  struct Slot {
    std::string name;
    Tensor param;
    nn::ParamGroup group;
    std::vector<double> m, v;
  };

  /// Takes the entries that currently require gradients.
  explicit Adam(const std::vector<nn::StateEntry>& params);
  /// Trainable parameters of `model`.
  static Adam for_module(const nn::Module& model);

  /// One update with each group's rate. A parameter frozen after the
  /// optimizer was built is skipped even if it holds a gradient.
  /// OptimizerError when a trainable parameter has no gradient.
  void step(const GroupRates& rates);
  /// Drops every gradient of the managed parameters.
  void zero_grad();

  std::size_t steps() const { return steps_; }
  const std::vector<Slot>& slots() const { return slots_; }

 private:
  std::vector<Slot> slots_;
  std::size_t steps_ = 0;
};

/// Scales the gradients of trainable parameters so their joint L2 norm is at
/// most `max_norm`; returns the norm before scaling. max_norm <= 0 disables.
double clip_grad_norm(const std::vector<Adam::Slot>& slots, double max_norm);

enum class ScheduleKind { kConstant, kStepDecay };

const char* schedule_name(ScheduleKind k);
ScheduleKind parse_schedule(const std::string& name);

/// lr(epoch) = lr0 * factor^floor(epoch / period) under step decay.
struct LrSchedule {
  ScheduleKind kind = ScheduleKind::kConstant;
  double factor = 0.5;
  std::size_t period = 10;

  double multiplier(std::size_t epoch) const;
  GroupRates at(const GroupRates& initial, std::size_t epoch) const { return initial.scaled(multiplier(epoch)); }
};

/// Improvement means a strictly higher metric. Training stops once
/// epoch - best_epoch > patience.
class EarlyStop {
 public:
  explicit EarlyStop(std::size_t patience = 5) : patience_(patience) {}

  /// Records the metric of `epoch`; true when it is a new best.
  bool observe(std::size_t epoch, double metric);
  bool should_stop(std::size_t epoch) const;

  bool has_best() const { return best_epoch_ >= 0; }
  long best_epoch() const { return best_epoch_; }
  double best() const { return best_; }
  std::size_t patience() const { return patience_; }

 private:
  std::size_t patience_;
  long best_epoch_ = -1;
  double best_ = -std::numeric_limits<double>::infinity();
};

}  // namespace avsr::train
