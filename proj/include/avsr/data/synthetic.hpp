// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "avsr/data/dataset.hpp"

namespace avsr::data {

/// Desk-scale stand-in for a word corpus. Class c is a mouth whose aperture
/// follows trajectory[c] (one value in [0,1] per timestep) and a tone at
/// frequencies[c] whose loudness follows the same trajectory.
struct SyntheticSpec {
  std::size_t classes = 10;
  std::size_t train = 2000, val = 200, test = 200;
  std::size_t timesteps = 7, height = 24, width = 24, audio_length = 1024;
  std::uint32_t sample_rate = 16000;
  /// Empty means derived from the seed / class index.
  std::vector<double> frequencies;
  std::vector<std::vector<double>> trajectories;
  /// Probability that a clip carries its class in both modalities. The
  /// others show the class in one modality and a neutral signal in the
  /// other.
  double consistency = 0.9;
  double video_noise = 0.3;  // pixel noise stddev
  double audio_noise = 0.3;  // sample noise stddev
  /// Extra noise stddev added to test clips in both modalities.
  double test_noise = 0.0;
  /// Class signal only in the middle three timesteps; the others show a
  /// different, randomly drawn class.
  bool distractors = false;
  std::uint64_t seed = 1;

  /// Fills in frequencies and trajectories when empty.
  SyntheticSpec resolved() const;
  /// ConfigError on any violated invariant (of the resolved spec).
  void validate() const;
  Extents extents() const;
};

/// First timestep of the three-step window that carries the class when
/// distractors are on.
std::size_t signal_window_start(std::size_t timesteps);

/// Clip `index` of `split`; a pure function of (spec, split, index).
Clip synthesize_clip(const SyntheticSpec& spec, Split split, std::size_t index);

/// Noise-free, fully consistent, distractor-free rendering of class c.
Clip class_template(const SyntheticSpec& spec, int label);

/// Writes every clip under out/<class>/<split>/<id>.{frames,wav16k} plus
/// out/manifest.txt. Reproducible from the seed. IoError on storage
/// failure.
DatasetManifest generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out);

}  // namespace avsr::data
