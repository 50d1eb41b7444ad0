// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "avsr/core/random.hpp"

namespace avsr::data {

struct AugmentConfig {
  bool enabled = false;
  double probability = 0.5;   // chance of a flip or crop per clip
  std::size_t crop_margin = 2;  // rows/cols removed before padding back
  double audio_noise = 0.1;   // stddev added to training waveforms

  /// ConfigError unless probability is in [0,1], audio_noise >= 0 and the
  /// margin is at most half the smaller frame side.
  void validate(std::size_t height, std::size_t width) const;
};

enum class VideoTransform { kNone, kFlip, kCrop };

/// Mirrors every frame of a [T,H,W] clip left to right, in place.
void flip_horizontal(std::span<float> frames, std::size_t timesteps, std::size_t height,
                     std::size_t width);

/// Keeps the (H-m)x(W-m) window at (top, left), top/left in [0,m], and
/// reflect-pads it back to HxW with floor(m/2) rows/cols before it. The
/// content moves by (floor(m/2) - top, floor(m/2) - left).
std::vector<float> crop_and_pad(std::span<const float> frames, std::size_t timesteps,
                                std::size_t height, std::size_t width, std::size_t margin,
                                std::size_t top, std::size_t left);

/// With probability cfg.probability applies a flip or a random crop (equal
/// odds) to all frames of the clip; identity when disabled. Reports the
/// transform taken through `taken` when non-null.
std::vector<float> augment_video(std::span<const float> frames, std::size_t timesteps,
                                 std::size_t height, std::size_t width, const AugmentConfig& cfg,
                                 Rng& rng, VideoTransform* taken = nullptr);

/// waveform + N(0, sigma^2) per sample. ConfigError for sigma < 0.
std::vector<float> augment_audio(std::span<const float> waveform, double sigma, Rng& rng);

}  // namespace avsr::data
