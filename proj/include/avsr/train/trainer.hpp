// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "avsr/data/batch.hpp"
#include "avsr/data/dataset.hpp"
#include "avsr/models/models.hpp"
#include "avsr/train/checkpoint.hpp"
#include "avsr/train/optim.hpp"

namespace avsr::train {

struct TrainConfig {
  std::size_t batch_size = 16;
  GroupRates rates{1e-4, 2e-4};
  ScheduleKind stream_schedule = ScheduleKind::kConstant;
  ScheduleKind fused_schedule = ScheduleKind::kStepDecay;
  double decay_factor = 0.5;
  std::size_t decay_period = 10;
  std::size_t patience = 5;
  double clip_norm = 5.0;  // <= 0 disables clipping
  // Stream protocol: stage 1 and 3 stop early, stage 2 runs a fixed count.
  std::size_t stage1_max_epochs = 10;
  std::size_t stage2_epochs = 5;
  std::size_t stage3_max_epochs = 15;
  // Fused protocol: phase A runs a fixed count, phase B stops early.
  std::size_t phase_a_epochs = 5;
  std::size_t phase_b_max_epochs = 25;
  data::AugmentConfig augment;
  std::size_t eval_batch = 50;
  std::uint64_t seed = 1;

  static TrainConfig tiny();
  static TrainConfig paper();
  /// ConfigError on any violated invariant.
  void validate() const;
  /// Stable one-line rendering of every field.
  std::string canonical() const;
};

/// One line of the metric log.
struct MetricRecord {
  std::string stage;
  std::size_t epoch = 0;
  data::Split split = data::Split::kTrain;
  double loss = 0.0;
  double accuracy = 0.0;
  double lr = 0.0;  // base group rate

  bool operator==(const MetricRecord&) const = default;
};

/// Per-epoch train and val metrics, one record each.
struct MetricLog {
  std::vector<MetricRecord> records;

  /// "stage epoch split loss accuracy lr" per line, full precision.
  void write(std::ostream& out) const;
  std::string str() const;
  static MetricLog parse(std::istream& in);
};

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
  std::size_t count = 0;
  std::vector<double> per_class;               // NaN for classes absent from the split
  std::vector<std::vector<std::size_t>> confusion;  // [truth][prediction]
};

/// Accuracy of sequence labels (highest mean probability) over a split,
/// in eval mode without augmentation. EmptyDatasetError for an empty set.
EvalResult evaluate(models::SequenceModel& model, const data::ClipSet& set, std::size_t batch_size = 50);

/// Observer hooks; `stage` is one of stage1/stage2/stage3 or phaseA/phaseB.
struct TrainHooks {
  std::function<void(const std::string& stage, models::SequenceModel& model)> on_stage_begin;
  std::function<void(const std::string& stage, models::SequenceModel& model)> on_stage_end;
  std::function<void(const MetricRecord&)> on_record;
};

struct StageSummary {
  std::string name;
  std::size_t epochs = 0;
  long best_epoch = -1;  // -1 when the stage keeps its last epoch
  double best_val = 0.0;
};

struct TrainResult {
  std::unique_ptr<models::SequenceModel> model;  // holds the returned weights
  Checkpoint best;
  MetricLog log;
  std::vector<StageSummary> stages;
  std::size_t total_epochs = 0;
};

/// Three-stage stream protocol. Stage 1: encoder, temporal-conv back-end and
/// attention until validation accuracy stalls. Stage 2: BGRU head swapped
/// in, everything else frozen, fixed epoch count. Stage 3: the whole stream
/// (minus the retired back-end) with early stopping. Returns the best stage
/// 3 weights. TrainingError on a non-finite loss.
TrainResult train_stream(const data::ClipSet& train, const data::ClipSet& val, models::Modality modality,
                         const models::ModelConfig& cfg, const TrainConfig& tcfg,
                         const TrainHooks& hooks = {});

/// Fused protocol from two stream checkpoints. Phase A: fusion BGRU,
/// combined attention and classifier with both streams frozen. Phase B:
/// everything, step-decayed and early-stopped. CheckpointError when a stream
/// checkpoint does not match `cfg`.
TrainResult train_fused(const data::ClipSet& train, const data::ClipSet& val, const Checkpoint& audio,
                        const Checkpoint& video, const models::ModelConfig& cfg, const TrainConfig& tcfg,
                        const TrainHooks& hooks = {});

}  // namespace avsr::train
