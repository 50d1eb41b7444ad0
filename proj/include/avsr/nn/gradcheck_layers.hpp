// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "avsr/ad/gradcheck_suite.hpp"
#include "avsr/nn/module.hpp"

namespace avsr::nn {

/// Trainable parameters of `m` as (name, tensor) pairs for grad_check.
std::vector<ad::NamedTensor> named_parameters(const Module& m, const std::string& prefix = "");

/// One case per composite layer on a tiny random instance; every
/// parameter of the layer and its input are checked.
std::vector<ad::GradCheckCase> layer_gradcheck_cases();

}  // namespace avsr::nn
