// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "avsr/ad/tensor.hpp"

namespace avsr::ad {

/// One recorded op. `backward` reads the output node's gradient and
/// accumulates into the inputs that require gradients.
struct TapeRecord {
  std::string op;
  std::vector<std::uint64_t> input_ids;
  std::uint64_t output_id = 0;
  std::shared_ptr<TensorNode> output;
  std::function<void(const TensorNode& out)> backward;
};

/// Ordered op log for reverse-mode differentiation. Records are appended in
/// execution order, which is a valid topological order by construction.
/// A tape belongs to one thread.
class Tape {
 public:
  /// Tape that ops on this thread record to.
  static Tape& current();

  void record(std::string op, const std::vector<Tensor>& inputs, const Tensor& output,
              std::function<void(const TensorNode& out)> backward);

  const std::vector<TapeRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

  /// Seeds d(loss)/d(loss) = 1 and replays the records in reverse, visiting
  /// each once. Clears the tape afterwards. Throws ShapeError for a
  /// non-scalar loss.
  void backward(const Tensor& loss);

 private:
  std::vector<TapeRecord> records_;
};

/// Makes `tape` the current tape for this thread while in scope.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Disables recording on this thread while in scope.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// While in scope, piecewise-linear ops (relu, max_pool) fold the branch
/// each element took into a running fingerprint. Two evaluations with equal
/// fingerprints followed the same linear piece.
class KinkTrace {
 public:
  KinkTrace();
  ~KinkTrace();
  KinkTrace(const KinkTrace&) = delete;
  KinkTrace& operator=(const KinkTrace&) = delete;

  std::uint64_t signature() const { return hash_; }

  static bool active();
  /// Folds `v` into the innermost active trace.
  static void mix(std::uint64_t v);

 private:
  std::uint64_t hash_ = 1469598103934665603ull;
  KinkTrace* previous_;
};

/// True when an op over `inputs` must be recorded.
bool needs_record(std::initializer_list<const Tensor*> inputs);

/// Backward pass on the current tape.
void backward(const Tensor& loss);

}  // namespace avsr::ad
