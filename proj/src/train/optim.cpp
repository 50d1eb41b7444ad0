// SPDX-License-Identifier: Apache-2.0
#include "avsr/train/optim.hpp"

#include <cmath>

#include "avsr/core/error.hpp"

namespace avsr::train {

Adam::Adam(const std::vector<nn::StateEntry>& params) {
  for (const auto& e : params) {
    if (e.is_buffer || !e.tensor.requires_grad()) continue;
    slots_.push_back(Slot{e.name, e.tensor, e.group, std::vector<double>(e.tensor.size(), 0.0),
                          std::vector<double>(e.tensor.size(), 0.0)});
  }
}

Adam Adam::for_module(const nn::Module& model) { return Adam(model.parameters()); }

void Adam::step(const GroupRates& rates) {
  for (const auto& s : slots_) {
    if (s.param.requires_grad() && !s.param.has_grad()) {
      throw OptimizerError("parameter " + s.name + " has no gradient");
    }
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(kBeta1, t), c2 = 1.0 - std::pow(kBeta2, t);
  for (auto& s : slots_) {
    if (!s.param.requires_grad()) continue;
    const double lr = s.group == nn::ParamGroup::kAttention ? rates.attention : rates.base;
    Tensor p = s.param;
    auto w = p.mutable_data();
    const auto g = p.mutable_grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      s.m[i] = kBeta1 * s.m[i] + (1.0 - kBeta1) * g[i];
      s.v[i] = kBeta2 * s.v[i] + (1.0 - kBeta2) * g[i] * g[i];
      const double mhat = s.m[i] / c1, vhat = s.v[i] / c2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + kEps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& s : slots_) s.param.zero_grad();
}

double clip_grad_norm(const std::vector<Adam::Slot>& slots, double max_norm) {
  double sq = 0.0;
  for (const auto& s : slots) {
    if (!s.param.requires_grad() || !s.param.has_grad()) continue;
    for (double g : s.param.node().grad) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (const auto& s : slots) {
      if (!s.param.requires_grad() || !s.param.has_grad()) continue;
      for (double& g : s.param.node().grad) g *= f;
    }
  }
  return norm;
}

const char* schedule_name(ScheduleKind k) {
  return k == ScheduleKind::kConstant ? "constant" : "step";
}

ScheduleKind parse_schedule(const std::string& name) {
  if (name == "constant") return ScheduleKind::kConstant;
  if (name == "step" || name == "step-decay") return ScheduleKind::kStepDecay;
  throw ConfigError("unknown schedule '" + name + "' (constant or step)");
}

double LrSchedule::multiplier(std::size_t epoch) const {
  if (kind == ScheduleKind::kConstant || period == 0) return 1.0;
  return std::pow(factor, static_cast<double>(epoch / period));
}

bool EarlyStop::observe(std::size_t epoch, double metric) {
  if (metric > best_) {
    best_ = metric;
    best_epoch_ = static_cast<long>(epoch);
    return true;
  }
  return false;
}

bool EarlyStop::should_stop(std::size_t epoch) const {
  return static_cast<long>(epoch) - best_epoch_ > static_cast<long>(patience_);
}

}  // namespace avsr::train
