// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "avsr/ad/tape.hpp"
#include "avsr/ad/tensor.hpp"
#include "avsr/core/error.hpp"

namespace avsr::ad::detail {

inline Tensor make_result(Shape shape, std::vector<double> data, const char* op) {
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw EvaluationError(std::string(op) + " produced a non-finite value");
    }
  }
  return Tensor(make_node(std::move(shape), std::move(data)));
}

/// Marks `out` as differentiable and appends the record.
template <typename Fn>
void record(const char* op, const std::vector<Tensor>& inputs, Tensor& out, Fn&& fn) {
  out.set_requires_grad(true);
  Tape::current().record(op, inputs, out, std::forward<Fn>(fn));
}

/// Gradient buffer of `t` when it participates in differentiation, else null.
inline double* grad_of(const Tensor& t) {
  if (!t.defined() || !t.requires_grad()) return nullptr;
  return t.node().ensure_grad().data();
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ShapeError(what);
}

}  // namespace avsr::ad::detail
