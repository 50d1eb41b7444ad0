// SPDX-License-Identifier: Apache-2.0
#include "avsr/data/augment.hpp"

#include <algorithm>
#include <string>

#include "avsr/core/error.hpp"

namespace avsr::data {

namespace {

// Mirror index into [0, n) without repeating the edge sample.
std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < static_cast<std::ptrdiff_t>(n) ? i : period - i);
}

void check_extent(std::size_t size, std::size_t t, std::size_t h, std::size_t w) {
  if (size != t * h * w) {
    throw SizeError("clip holds " + std::to_string(size) + " values, expected " + std::to_string(t) +
                    "x" + std::to_string(h) + "x" + std::to_string(w));
  }
}

}  // namespace

void AugmentConfig::validate(std::size_t height, std::size_t width) const {
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw ConfigError("augmentation probability must lie in [0,1]");
  }
  if (!(audio_noise >= 0.0)) throw ConfigError("audio noise stddev must be non-negative");
  if (2 * crop_margin > std::min(height, width)) {
    throw ConfigError("crop margin " + std::to_string(crop_margin) + " exceeds half of a " +
                      std::to_string(height) + "x" + std::to_string(width) + " frame");
  }
}

void flip_horizontal(std::span<float> frames, std::size_t timesteps, std::size_t height,
                     std::size_t width) {
  check_extent(frames.size(), timesteps, height, width);
  for (std::size_t row = 0; row < timesteps * height; ++row) {
    std::reverse(frames.begin() + static_cast<std::ptrdiff_t>(row * width),
                 frames.begin() + static_cast<std::ptrdiff_t>((row + 1) * width));
  }
}

std::vector<float> crop_and_pad(std::span<const float> frames, std::size_t timesteps,
                                std::size_t height, std::size_t width, std::size_t margin,
                                std::size_t top, std::size_t left) {
  check_extent(frames.size(), timesteps, height, width);
  if (margin >= height || margin >= width || top > margin || left > margin) {
    throw ConfigError("crop window does not fit the frame");
  }
  const std::size_t wh = height - margin, ww = width - margin;
  const auto before = static_cast<std::ptrdiff_t>(margin / 2);
  std::vector<float> out(frames.size());
  for (std::size_t t = 0; t < timesteps; ++t) {
    const float* src = frames.data() + t * height * width;
    float* dst = out.data() + t * height * width;
    for (std::size_t y = 0; y < height; ++y) {
      const std::size_t sy = top + reflect(static_cast<std::ptrdiff_t>(y) - before, wh);
      for (std::size_t x = 0; x < width; ++x) {
        const std::size_t sx = left + reflect(static_cast<std::ptrdiff_t>(x) - before, ww);
        dst[y * width + x] = src[sy * width + sx];
      }
    }
  }
  return out;
}

std::vector<float> augment_video(std::span<const float> frames, std::size_t timesteps,
                                 std::size_t height, std::size_t width, const AugmentConfig& cfg,
                                 Rng& rng, VideoTransform* taken) {
  check_extent(frames.size(), timesteps, height, width);
  VideoTransform choice = VideoTransform::kNone;
  if (cfg.enabled && rng.bernoulli(cfg.probability)) {
    choice = (rng.bernoulli(0.5) || cfg.crop_margin == 0) ? VideoTransform::kFlip : VideoTransform::kCrop;
  }
  if (taken) *taken = choice;
  std::vector<float> out;
  switch (choice) {
    case VideoTransform::kNone:
      out.assign(frames.begin(), frames.end());
      break;
    case VideoTransform::kFlip:
      out.assign(frames.begin(), frames.end());
      flip_horizontal(out, timesteps, height, width);
      break;
    case VideoTransform::kCrop: {
      const auto m = static_cast<std::int64_t>(cfg.crop_margin);
      const auto top = static_cast<std::size_t>(rng.uniform_int(0, m));
      const auto left = static_cast<std::size_t>(rng.uniform_int(0, m));
      out = crop_and_pad(frames, timesteps, height, width, cfg.crop_margin, top, left);
      break;
    }
  }
  for (float& v : out) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

std::vector<float> augment_audio(std::span<const float> waveform, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw ConfigError("audio noise stddev must be non-negative");
  std::vector<float> out(waveform.begin(), waveform.end());
  if (sigma == 0.0) return out;
  for (float& v : out) v = static_cast<float>(v + rng.normal(0.0, sigma));
  return out;
}

}  // namespace avsr::data
