// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "avsr/ad/tensor.hpp"

namespace avsr::ad {

using NamedTensor = std::pair<std::string, Tensor>;

struct GradCheckOptions {
  double eps = 1e-4;
  double tol = 1e-4;
  std::size_t probes = 32;  // coordinates sampled per parameter
  std::uint64_t seed = 0;
  /// Test hook: the analytic gradient of the parameter with this name is
  /// doubled before comparison, simulating a broken backward.
  std::string fault_param;
  /// When false, a parameter whose every coordinate straddles a kink fails.
  /// When true it is reported as unverified and the check rests on the
  /// coordinates that were compared.
  bool allow_unverified = false;
};

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t probes = 0;  // coordinates compared
  std::size_t kinked = 0;  // coordinates replaced because they straddled a kink
  bool pass = false;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_rel_error = 0.0;
  std::size_t probe_count = 0;
  std::size_t kinked = 0;
  std::size_t unverified = 0;  // parameters with no usable coordinate
  bool pass = false;

  /// Names of the parameters that failed.
  std::vector<std::string> failures() const;
};

/// Compares reverse-mode gradients of the scalar `fn()` against central
/// differences (f(p+eps) - f(p-eps)) / 2eps on randomly chosen coordinates.
/// Per parameter the error is max|a-n| / max(max|a|, max|n|, 1e-8) over its
/// probes. A coordinate whose two evaluations took different relu/max-pool
/// branches (see KinkTrace) is replaced by another; a parameter left with no
/// usable coordinate fails unless `allow_unverified`. Throws EvaluationError if fn yields a
/// non-finite value.
GradCheckReport grad_check(const std::function<Tensor()>& fn, const std::vector<NamedTensor>& params,
                           const GradCheckOptions& options = {});

}  // namespace avsr::ad
