// SPDX-License-Identifier: Apache-2.0
#include "avsr/ad/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "avsr/ad/tape.hpp"
#include "avsr/core/error.hpp"

namespace avsr::ad {

namespace {

struct Evaluation {
  double value;
  std::uint64_t signature;
};

Evaluation evaluate(const std::function<Tensor()>& fn) {
  NoGradGuard guard;
  KinkTrace trace;
  const Tensor out = fn();
  if (out.size() != 1) throw ShapeError("grad_check objective must be scalar");
  const double v = out.item();
  if (!std::isfinite(v)) throw EvaluationError("grad_check objective is not finite");
  return {v, trace.signature()};
}

}  // namespace

std::vector<std::string> GradCheckReport::failures() const {
  std::vector<std::string> names;
  for (const auto& p : params) {
    if (!p.pass) names.push_back(p.name);
  }
  return names;
}

GradCheckReport grad_check(const std::function<Tensor()>& fn, const std::vector<NamedTensor>& params,
                           const GradCheckOptions& options) {
  if (!(options.eps > 0.0)) throw UsageError("grad_check: eps must be positive");

  for (const auto& [name, p] : params) {
    Tensor t = p;
    t.zero_grad();
  }
  {
    Tape tape;
    TapeScope scope(tape);
    const Tensor loss = fn();
    if (!std::isfinite(loss.item())) throw EvaluationError("grad_check objective is not finite");
    tape.backward(loss);
  }

  std::mt19937_64 engine(options.seed);
  GradCheckReport report;
  report.pass = true;
  std::size_t compared = 0;
  for (const auto& [name, param] : params) {
    Tensor p = param;
    std::vector<double> analytic = p.grad();
    if (name == options.fault_param) {
      for (double& g : analytic) g *= 2.0;
    }
    std::vector<std::size_t> pool(p.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    std::shuffle(pool.begin(), pool.end(), engine);
    double max_diff = 0.0, max_mag = 1e-8;
    std::size_t used = 0, kinked = 0;
    auto values = p.mutable_data();
    // Coordinates whose +-eps evaluations straddle a relu or max-pool
    // switch are not differentiable at this scale; draw a replacement.
    for (std::size_t i = 0; i < pool.size() && used < options.probes; ++i) {
      const std::size_t c = pool[i];
      const double saved = values[c];
      values[c] = saved + options.eps;
      const Evaluation up = evaluate(fn);
      values[c] = saved - options.eps;
      const Evaluation down = evaluate(fn);
      values[c] = saved;
      if (up.signature != down.signature) {
        ++kinked;
        continue;
      }
      const double numeric = (up.value - down.value) / (2.0 * options.eps);
      max_diff = std::max(max_diff, std::abs(analytic[c] - numeric));
      max_mag = std::max({max_mag, std::abs(analytic[c]), std::abs(numeric)});
      ++used;
    }
    ParamCheck check;
    check.name = name;
    check.probes = used;
    check.kinked = kinked;
    check.max_rel_error = max_diff / max_mag;
    check.pass = used > 0 ? check.max_rel_error < options.tol : options.allow_unverified;
    if (used == 0) ++report.unverified;
    report.pass = report.pass && check.pass;
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.probe_count += check.probes;
    compared += used;
    report.kinked += check.kinked;
    report.params.push_back(check);
    p.zero_grad();
  }
  if (compared == 0) report.pass = false;
  return report;
}

}  // namespace avsr::ad
