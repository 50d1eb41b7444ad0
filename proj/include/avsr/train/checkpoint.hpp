// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include "avsr/models/models.hpp"
#include "avsr/nn/state_dict.hpp"

namespace avsr::train {

using Digest = std::array<std::uint8_t, 32>;

/// SHA-256 of the canonical model configuration and the modality. Two
/// models share a digest exactly when their checkpoints are interchangeable.
Digest config_digest(const models::ModelConfig& cfg, models::Modality modality);
std::string digest_hex(const Digest& d);
/// Plain SHA-256 of `text`.
Digest sha256(std::string_view text);

struct CheckpointMeta {
  std::uint32_t epoch = 0;
  float metric = 0.0f;
  Digest digest{};
};

/// Full model state (parameters and batchnorm statistics) at single
/// precision, plus training metadata.
struct Checkpoint {
  nn::StateDict state;
  CheckpointMeta meta;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Snapshot of `model`, values rounded to single precision.
Checkpoint make_checkpoint(const models::SequenceModel& model, std::uint32_t epoch, double metric);

/// "AVSRCKPT", u32 version, u32 entry count, then per entry u16 name
/// length, name, u8 rank, u32 extents[rank], float32 data; finally u32
/// epoch, f32 metric, 32-byte digest. Little-endian. IoError when the file
/// cannot be written.
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// FormatError on a bad magic, truncation or trailing bytes; CheckpointError
/// on an unsupported version.
Checkpoint read_checkpoint(const std::filesystem::path& path);

void save_checkpoint(const models::SequenceModel& model, std::uint32_t epoch, double metric,
                     const std::filesystem::path& path);

/// Copies a checkpoint into a model built for (cfg, modality). CheckpointError
/// when the digest disagrees or an entry is missing or misshapen.
void apply_checkpoint(const Checkpoint& ckpt, models::SequenceModel& model);

/// Builds the model for (cfg, modality) and loads the file into it.
std::unique_ptr<models::SequenceModel> load_checkpoint(const std::filesystem::path& path,
                                                       models::Modality modality,
                                                       const models::ModelConfig& cfg);

}  // namespace avsr::train
