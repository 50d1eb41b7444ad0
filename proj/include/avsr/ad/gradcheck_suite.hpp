// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "avsr/ad/gradcheck.hpp"

namespace avsr::ad {

/// A named, self-contained gradient check on tiny random inputs.
struct GradCheckCase {
  std::string name;
  std::function<GradCheckReport(const GradCheckOptions&)> run;
};

/// One case per differentiable primitive (both GRU directions, both
/// batchnorm modes, each convolution rank).
std::vector<GradCheckCase> op_gradcheck_cases();

/// Scalar probe objective sum(out * w) with fixed pseudo-random weights, so
/// every output element contributes a distinct gradient.
Tensor probe_objective(const Tensor& out, std::uint64_t seed = 99);

}  // namespace avsr::ad
