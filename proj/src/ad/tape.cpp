// SPDX-License-Identifier: Apache-2.0
#include "avsr/ad/tape.hpp"

#include "avsr/core/error.hpp"

namespace avsr::ad {

namespace {

thread_local Tape default_tape;
thread_local Tape* active_tape = &default_tape;
thread_local bool recording = true;

}  // namespace

Tape& Tape::current() { return *active_tape; }

void Tape::record(std::string op, const std::vector<Tensor>& inputs, const Tensor& output,
                  std::function<void(const TensorNode& out)> backward) {
  TapeRecord rec;
  rec.op = std::move(op);
  rec.input_ids.reserve(inputs.size());
  for (const auto& t : inputs) rec.input_ids.push_back(t.id());
  rec.output_id = output.id();
  rec.output = output.node_ptr();
  rec.backward = std::move(backward);
  records_.push_back(std::move(rec));
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || !loss.shape().empty()) {
    records_.clear();
    throw ShapeError("backward requires a scalar loss, got shape " +
                     (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  loss.node().ensure_grad()[0] += 1.0;
  // Move records out first so a throwing backward still leaves an empty tape.
  std::vector<TapeRecord> recs = std::move(records_);
  records_.clear();
  for (auto it = recs.rbegin(); it != recs.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // no gradient flowed here
    it->backward(*it->output);
  }
}

TapeScope::TapeScope(Tape& tape) : previous_(active_tape) { active_tape = &tape; }
TapeScope::~TapeScope() { active_tape = previous_; }

thread_local KinkTrace* kink_trace = nullptr;

NoGradGuard::NoGradGuard() : previous_(recording) { recording = false; }
NoGradGuard::~NoGradGuard() { recording = previous_; }

KinkTrace::KinkTrace() : previous_(kink_trace) { kink_trace = this; }
KinkTrace::~KinkTrace() { kink_trace = previous_; }

bool KinkTrace::active() { return kink_trace != nullptr; }

void KinkTrace::mix(std::uint64_t v) {
  if (kink_trace == nullptr) return;
  kink_trace->hash_ = (kink_trace->hash_ ^ v) * 1099511628211ull;
}

bool grad_enabled() { return recording; }

bool needs_record(std::initializer_list<const Tensor*> inputs) {
  if (!recording) return false;
  for (const Tensor* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void backward(const Tensor& loss) { Tape::current().backward(loss); }

}  // namespace avsr::ad
