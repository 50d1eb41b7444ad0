// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace avsr {

/// Worker cap read once from AVSR_THREADS (default 1).
std::size_t thread_cap();

/// Runs body(i) for i in [0, n). Iterations must write disjoint memory so the
/// result is bitwise independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace avsr
