// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace avsr::data {

// Frame file: "AVFR", u16 T, u16 H, u16 W, u16 reserved (0), then T*H*W
// little-endian float32 values. 12-byte header.
inline constexpr std::size_t kFrameHeaderBytes = 12;

struct FrameArray {
  std::size_t timesteps = 0, height = 0, width = 0;
  std::vector<float> values;
};

/// IoError when the file cannot be written.
void write_frames(const std::filesystem::path& path, std::span<const float> values,
                  std::size_t timesteps, std::size_t height, std::size_t width);
/// IoError when unreadable, FormatError on a bad magic, truncated payload
/// or trailing bytes.
FrameArray read_frames(const std::filesystem::path& path);

struct Waveform {
  std::uint32_t sample_rate = 0;
  std::vector<float> samples;  // in [-1, 1]
};

/// Mono 16-bit PCM WAV. Samples are clamped to [-1,1] and scaled by 32767.
void write_wav16(const std::filesystem::path& path, std::span<const float> samples,
                 std::uint32_t sample_rate);
/// Accepts only mono 16-bit PCM; unknown chunks are skipped.
Waveform read_wav16(const std::filesystem::path& path);

}  // namespace avsr::data
