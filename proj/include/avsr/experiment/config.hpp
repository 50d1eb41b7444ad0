// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "avsr/data/synthetic.hpp"
#include "avsr/models/config.hpp"
#include "avsr/train/trainer.hpp"

namespace avsr::experiment {

/// Values each ablation axis takes. Every table varies one axis and holds
/// the others at attention on, noise off, depth 18.
struct AblationAxes {
  std::vector<models::Modality> modalities{models::Modality::kAudio, models::Modality::kVideo,
                                           models::Modality::kFused};
  std::vector<bool> attention{false, true};
  std::vector<bool> noise{false, true};
  std::vector<int> depth{18, 34};
};

/// Everything one experiment needs. Clip extents and the class count are
/// not configured here: they come from the dataset.
struct ExperimentConfig {
  models::ModelConfig model = models::ModelConfig::tiny();
  train::TrainConfig train = train::TrainConfig::tiny();
  /// Generated under output/data when no manifest is given.
  data::SyntheticSpec synthetic;
  std::filesystem::path manifest;
  std::filesystem::path audio_checkpoint;
  std::filesystem::path video_checkpoint;
  std::filesystem::path output = "runs";
  std::uint64_t seed = 1;
  AblationAxes axes;
};

/// Parses `key = value` lines. `#` starts a comment, blank lines are
/// skipped, keys are dotted (model.depth.video = 34). Unknown keys,
/// repeated keys and malformed values are ConfigErrors naming the line.
/// Relative paths are resolved against `base_dir`.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {},
                              const std::string& source = "config");

/// parse_config on a file; IoError if it cannot be read.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every accepted key, in documentation order.
std::vector<std::string> config_keys();

/// Copies extents and class count from the data into the model config.
void adopt_extents(models::ModelConfig& model, const data::Extents& extents);

}  // namespace avsr::experiment
