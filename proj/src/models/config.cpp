// SPDX-License-Identifier: Apache-2.0
#include "avsr/models/config.hpp"

#include <sstream>

#include "avsr/core/error.hpp"

namespace avsr::models {

const char* profile_name(Profile p) { return p == Profile::kPaper ? "paper" : "tiny"; }

const char* modality_name(Modality m) {
  switch (m) {
    case Modality::kAudio: return "audio";
    case Modality::kVideo: return "video";
    case Modality::kFused: return "fused";
  }
  return "?";
}

Profile parse_profile(const std::string& s) {
  if (s == "paper") return Profile::kPaper;
  if (s == "tiny") return Profile::kTiny;
  throw UsageError("unknown profile '" + s + "' (expected paper or tiny)");
}

Modality parse_modality(const std::string& s) {
  if (s == "audio") return Modality::kAudio;
  if (s == "video") return Modality::kVideo;
  if (s == "fused") return Modality::kFused;
  throw UsageError("unknown modality '" + s + "' (expected audio, video or fused)");
}

ModelConfig ModelConfig::tiny(std::size_t classes) {
  ModelConfig c;
  c.classes = classes;
  return c;
}

ModelConfig ModelConfig::paper(std::size_t classes) {
  ModelConfig c;
  c.profile = Profile::kPaper;
  c.classes = classes;
  c.timesteps = 29;
  c.height = 96;
  c.width = 96;
  c.audio_length = 18560;
  c.gru_hidden = 1024;
  c.frontend_channels = 64;
  c.stage_widths = {64, 128, 256, 512};
  c.backend_width = 512;
  return c;
}

bool ModelConfig::attention_at(Modality site) const {
  switch (site) {
    case Modality::kAudio: return attention.audio;
    case Modality::kVideo: return attention.video;
    case Modality::kFused: return attention.combined;
  }
  return false;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("model config: " + what); };
  if (classes < 2) fail("classes must be >= 2");
  if (timesteps < 1) fail("timesteps must be >= 1");
  if (profile == Profile::kPaper && (timesteps != 29 || gru_hidden != 1024)) {
    fail("paper profile fixes timesteps = 29 and gru hidden = 1024");
  }
  if (profile == Profile::kTiny && (timesteps != 7 || gru_hidden != 32)) {
    fail("tiny profile fixes timesteps = 7 and gru hidden = 32");
  }
  for (int d : {video_depth, audio_depth}) {
    if (d != 18 && d != 34) fail("backbone depth must be 18 or 34");
  }
  if (height < 7 || width < 7) fail("frames must be at least 7x7");
  if (audio_length < timesteps) fail("audio length must be >= timesteps");
  if (stage_widths.size() != 4) fail("four stage widths required");
  for (std::size_t w : stage_widths) {
    if (w == 0) fail("stage widths must be positive");
  }
  if (frontend_channels == 0 || backend_width == 0 || gru_layers == 0) fail("zero width");
}

std::string ModelConfig::canonical() const {
  std::ostringstream os;
  os << "profile=" << profile_name(profile) << ";classes=" << classes << ";T=" << timesteps
     << ";H=" << height << ";W=" << width << ";L=" << audio_length << ";depth.video=" << video_depth
     << ";depth.audio=" << audio_depth << ";gru=" << gru_hidden << "x" << gru_layers
     << ";attn=" << attention.video << attention.audio << attention.combined
     << ";frontend=" << frontend_channels << ";stages=";
  for (std::size_t w : stage_widths) os << w << ",";
  os << ";backend=" << backend_width;
  return os.str();
}

}  // namespace avsr::models
