// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "avsr/data/dataset.hpp"
#include "avsr/experiment/config.hpp"
#include "avsr/experiment/results.hpp"
#include "avsr/train/trainer.hpp"

namespace avsr::experiment {

/// Generates the synthetic corpus described by cfg.synthetic under `out`
/// and prints split counts. Returns the manifest path.
std::filesystem::path cmd_gen_data(const ExperimentConfig& cfg, const std::filesystem::path& out,
                                   std::ostream& log);

/// The dataset named by data.manifest, or the synthetic corpus under
/// output/data (generated on first use, regenerated when data.synthetic.* changes).
data::DatasetManifest resolve_dataset(const ExperimentConfig& cfg, std::ostream& log);

struct TrainOutputs {
  std::filesystem::path checkpoint;  // output/<modality>.ckpt
  std::filesystem::path metrics;     // output/<modality>.log
  std::size_t epochs = 0;
  double best_val = 0.0;
};

/// Runs the stream or fused protocol. Fused training reads
/// checkpoint.audio and checkpoint.video; UsageError naming whichever is
/// missing.
TrainOutputs cmd_train(const ExperimentConfig& cfg, models::Modality modality, std::ostream& log);

/// Modality stored in a checkpoint, read from its entry names.
models::Modality checkpoint_modality(const train::Checkpoint& ckpt);

/// Loads `ckpt` against the model config of `cfg` with the manifest's
/// extents and prints accuracy, per-class accuracy and the confusion
/// matrix. CheckpointError when the two disagree.
train::EvalResult cmd_eval(const ExperimentConfig& cfg, const std::filesystem::path& ckpt,
                           const std::filesystem::path& manifest, data::Split split, std::ostream& out);

struct AblationReport {
  std::vector<ResultTable> tables;
  std::size_t trained = 0;  // runs trained now (cached cells excluded)
  std::size_t failed = 0;   // cells whose training diverged
};

/// Trains and tests every grid cell implied by cfg.axes (cached under
/// output/cells by configuration digest), then prints the tables and
/// writes output/results.tsv and output/tables.txt. A diverging cell is
/// marked failed and the rest still run.
AblationReport cmd_ablate(const ExperimentConfig& cfg, std::ostream& out);

enum class GradcheckScope { kOp, kLayer, kModel };
GradcheckScope parse_gradcheck_scope(const std::string& s);

struct GradcheckRequest {
  GradcheckScope scope = GradcheckScope::kOp;
  models::Modality modality = models::Modality::kFused;  // model scope
  std::size_t coordinates = 64;                          // model scope
  std::uint64_t seed = 0;
  /// Doubles the analytic gradient of this parameter (negative control).
  std::string fault_param;
};

/// Runs the checks in scope, one line per case. Returns true when all pass.
bool cmd_gradcheck(const GradcheckRequest& req, std::ostream& out);

}  // namespace avsr::experiment
