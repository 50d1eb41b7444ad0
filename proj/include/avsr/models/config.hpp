// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace avsr::models {

enum class Profile { kPaper, kTiny };
enum class Modality { kAudio, kVideo, kFused };

const char* profile_name(Profile p);
const char* modality_name(Modality m);
/// Parses "paper"/"tiny" and "audio"/"video"/"fused"; UsageError otherwise.
Profile parse_profile(const std::string& s);
Modality parse_modality(const std::string& s);

struct AttentionSites {
  bool video = true;
  bool audio = true;
  bool combined = true;

  bool operator==(const AttentionSites&) const = default;
};

/// Architecture description. The profile pins T and the GRU width; the
/// remaining widths are free but default to the profile's values.
struct ModelConfig {
  Profile profile = Profile::kTiny;
  std::size_t classes = 10;
  std::size_t timesteps = 7;
  std::size_t height = 24;
  std::size_t width = 24;
  std::size_t audio_length = 1024;
  int video_depth = 18;
  int audio_depth = 18;
  std::size_t gru_hidden = 32;
  std::size_t gru_layers = 2;
  AttentionSites attention;
  std::size_t frontend_channels = 8;
  std::vector<std::size_t> stage_widths{8, 16, 32, 64};
  std::size_t backend_width = 64;

  static ModelConfig tiny(std::size_t classes = 10);
  static ModelConfig paper(std::size_t classes = 500);

  bool attention_at(Modality site) const;
  /// Backbone output width F.
  std::size_t feature_width() const { return stage_widths.back(); }

  /// ConfigError on any violated invariant.
  void validate() const;
  /// Stable one-line rendering of every field; the digest input.
  std::string canonical() const;

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace avsr::models
