// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "avsr/data/dataset.hpp"

namespace avsr::data {

/// What every clip of a pre-extracted word corpus must satisfy.
struct LayoutExpectations {
  std::size_t timesteps = 29;
  std::uint32_t sample_rate = 16000;
  /// 0 accepts any length as long as all clips agree.
  std::size_t audio_length = 0;
};

/// Scans root/<WORD>/<split>/<id>.frames + <id>.wav16k. Words become classes
/// in sorted order; clip ids are the file stems. Every clip is decoded and
/// checked; all offending ids are reported in one IngestionError. Frame
/// size is taken from the first clip and must then agree.
DatasetManifest load_lrw_layout(const std::filesystem::path& root,
                                const LayoutExpectations& expect = {});

struct Rect {
  std::size_t top = 0, left = 0, height = 0, width = 0;
};

/// Crops a fixed rectangle from one [H0,W0] frame. No resampling.
/// BoundsError when the rectangle leaves the frame or is empty.
std::vector<float> extract_mouth_roi(std::span<const float> frame, std::size_t height,
                                     std::size_t width, const Rect& rect);

/// Same crop applied to each frame of a [T,H0,W0] clip.
std::vector<float> extract_mouth_roi_clip(std::span<const float> frames, std::size_t timesteps,
                                          std::size_t height, std::size_t width, const Rect& rect);

}  // namespace avsr::data
