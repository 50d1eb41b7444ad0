// SPDX-License-Identifier: Apache-2.0
#include "avsr/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <system_error>

#include "avsr/core/error.hpp"
#include "avsr/core/random.hpp"
#include "avsr/data/formats.hpp"

namespace avsr::data {

namespace {

constexpr double kNeutralAperture = 0.5;
constexpr std::size_t kSignalWindow = 3;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t clip_seed(std::uint64_t seed, Split split, std::size_t index) {
  return splitmix(splitmix(seed ^ (static_cast<std::uint64_t>(split) + 1) * 0x51ed27ull) + index);
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::string class_name(std::size_t c, std::size_t classes) {
  const int digits = classes > 100 ? 3 : 2;
  char buf[32];
  std::snprintf(buf, sizeof buf, "class%0*zu", digits, c);
  return buf;
}

std::string clip_id(Split split, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05zu", split_name(split), index);
  return buf;
}

// What each timestep of a clip shows in each modality. A negative class
// means the neutral signal.
struct Script {
  std::vector<int> video;
  std::vector<int> audio;
};

void render(const SyntheticSpec& s, const Script& script, double video_noise, double audio_noise,
            Rng& rng, Clip& clip) {
  const std::size_t T = s.timesteps, H = s.height, W = s.width, L = s.audio_length;
  clip.frames.assign(T * H * W, 0.0f);
  clip.waveform.assign(L, 0.0f);
  const double cy = (static_cast<double>(H) - 1.0) / 2.0, cx = (static_cast<double>(W) - 1.0) / 2.0;
  const double ax = 0.3 * static_cast<double>(W);
  for (std::size_t t = 0; t < T; ++t) {
    const int c = script.video[t];
    const double aperture = c < 0 ? kNeutralAperture : s.trajectories[c][t];
    const double ay = 0.5 + aperture * 0.35 * static_cast<double>(H);
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        const double dy = (static_cast<double>(y) - cy) / ay, dx = (static_cast<double>(x) - cx) / ax;
        const double r = std::sqrt(dy * dy + dx * dx);
        const double inside = 1.0 / (1.0 + std::exp((r - 1.0) * 8.0));
        double v = 0.75 - 0.6 * inside;
        if (video_noise > 0.0) v += rng.normal(0.0, video_noise);
        clip.frames[(t * H + y) * W + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    const int c = script.audio[t];
    const std::size_t lo = t * L / T, hi = (t + 1) * L / T;
    for (std::size_t n = lo; n < hi; ++n) {
      double v = 0.0;
      if (c >= 0) {
        const double amp = 0.15 + 0.55 * s.trajectories[c][t];
        v = amp * std::sin(2.0 * std::numbers::pi * s.frequencies[c] * static_cast<double>(n) /
                           static_cast<double>(s.sample_rate));
      }
      if (audio_noise > 0.0) v += rng.normal(0.0, audio_noise);
      clip.waveform[n] = static_cast<float>(std::clamp(v, -1.0, 1.0));
    }
  }
}

}  // namespace

std::size_t signal_window_start(std::size_t timesteps) {
  return timesteps > kSignalWindow ? (timesteps - kSignalWindow) / 2 : 0;
}

SyntheticSpec SyntheticSpec::resolved() const {
  SyntheticSpec s = *this;
  if (s.frequencies.empty() && s.classes > 0) {
    const double top = 0.45 * s.sample_rate;
    const double step = std::min(250.0, (top - 500.0) / std::max<double>(1.0, s.classes - 1.0));
    for (std::size_t c = 0; c < s.classes; ++c) s.frequencies.push_back(500.0 + step * c);
  }
  if (s.trajectories.empty() && s.classes > 0 && s.timesteps > 0) {
    Rng rng(splitmix(seed ^ 0x7a11ull));
    double min_gap = 0.25 * std::sqrt(static_cast<double>(s.timesteps));
    while (s.trajectories.size() < s.classes) {
      bool placed = false;
      for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
        const double cycles = rng.uniform(0.4, 1.6);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        std::vector<double> traj(s.timesteps);
        for (std::size_t t = 0; t < s.timesteps; ++t) {
          traj[t] = 0.5 + 0.45 * std::sin(2.0 * std::numbers::pi * cycles * static_cast<double>(t) /
                                               static_cast<double>(s.timesteps) + phase);
        }
        placed = std::all_of(s.trajectories.begin(), s.trajectories.end(),
                             [&](const auto& other) { return distance(traj, other) >= min_gap; });
        if (placed) s.trajectories.push_back(std::move(traj));
      }
      if (!placed) min_gap *= 0.9;
    }
  }
  return s;
}

void SyntheticSpec::validate() const {
  const SyntheticSpec s = resolved();
  auto fail = [](const std::string& why) { throw ConfigError("synthetic spec: " + why); };
  if (s.classes < 2) fail("need at least 2 classes");
  if (s.train + s.val + s.test == 0) fail("all split counts are zero");
  if (s.timesteps == 0 || s.height < 8 || s.width < 8) fail("need T >= 1 and frames of at least 8x8");
  if (s.audio_length < s.timesteps) fail("audio_length must be at least T");
  if (s.sample_rate == 0) fail("sample_rate must be positive");
  if (!(s.consistency >= 0.0 && s.consistency <= 1.0)) fail("consistency must lie in [0,1]");
  if (!(s.video_noise >= 0.0) || !(s.audio_noise >= 0.0) || !(s.test_noise >= 0.0)) {
    fail("noise stddevs must be non-negative");
  }
  if (s.distractors && s.timesteps <= kSignalWindow) fail("distractors need T > 3");
  if (s.frequencies.size() != s.classes) fail("need one frequency per class");
  if (s.trajectories.size() != s.classes) fail("need one trajectory per class");
  for (std::size_t c = 0; c < s.classes; ++c) {
    const double f = s.frequencies[c];
    if (!(f > 0.0 && f < 0.5 * s.sample_rate)) fail("frequency of class " + std::to_string(c) + " is out of band");
    if (s.trajectories[c].size() != s.timesteps) fail("trajectory of class " + std::to_string(c) + " has the wrong length");
    for (double a : s.trajectories[c]) {
      if (!(a >= 0.0 && a <= 1.0)) fail("trajectory values must lie in [0,1]");
    }
    for (std::size_t d = 0; d < c; ++d) {
      if (s.frequencies[d] == f || distance(s.trajectories[d], s.trajectories[c]) < 1e-9) {
        fail("classes " + std::to_string(d) + " and " + std::to_string(c) + " share a signature");
      }
    }
  }
}

Extents SyntheticSpec::extents() const {
  return Extents{timesteps, height, width, audio_length, classes, sample_rate};
}

Clip synthesize_clip(const SyntheticSpec& spec, Split split, std::size_t index) {
  const SyntheticSpec s = spec.resolved();
  Rng rng(clip_seed(s.seed, split, index));
  Clip clip;
  clip.id = clip_id(split, index);
  clip.label = static_cast<int>(index % s.classes);
  Script script{std::vector<int>(s.timesteps, clip.label), std::vector<int>(s.timesteps, clip.label)};
  if (!rng.bernoulli(s.consistency)) {
    auto& neutral = rng.bernoulli(0.5) ? script.video : script.audio;
    std::fill(neutral.begin(), neutral.end(), -1);
  }
  if (s.distractors) {
    const int other = static_cast<int>(
        (clip.label + 1 + rng.uniform_int(0, static_cast<std::int64_t>(s.classes) - 2)) % s.classes);
    const std::size_t lo = signal_window_start(s.timesteps);
    for (std::size_t t = 0; t < s.timesteps; ++t) {
      if (t >= lo && t < lo + kSignalWindow) continue;
      if (script.video[t] >= 0) script.video[t] = other;
      if (script.audio[t] >= 0) script.audio[t] = other;
    }
  }
  double vn = s.video_noise, an = s.audio_noise;
  if (split == Split::kTest && s.test_noise > 0.0) {
    vn = std::hypot(vn, s.test_noise);
    an = std::hypot(an, s.test_noise);
  }
  render(s, script, vn, an, rng, clip);
  return clip;
}

Clip class_template(const SyntheticSpec& spec, int label) {
  const SyntheticSpec s = spec.resolved();
  if (label < 0 || static_cast<std::size_t>(label) >= s.classes) {
    throw LabelError("class " + std::to_string(label) + " out of range");
  }
  Rng rng(0);
  Clip clip;
  clip.id = "template_" + std::to_string(label);
  clip.label = label;
  Script script{std::vector<int>(s.timesteps, label), std::vector<int>(s.timesteps, label)};
  render(s, script, 0.0, 0.0, rng, clip);
  return clip;
}

DatasetManifest generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out) {
  spec.validate();
  const SyntheticSpec s = spec.resolved();
  DatasetManifest m;
  m.root = out;
  m.extents = s.extents();
  for (std::size_t c = 0; c < s.classes; ++c) m.class_names.push_back(class_name(c, s.classes));
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
  const std::pair<Split, std::size_t> splits[] = {
      {Split::kTrain, s.train}, {Split::kVal, s.val}, {Split::kTest, s.test}};
  for (const auto& [split, count] : splits) {
    for (const auto& name : m.class_names) {
      std::filesystem::create_directories(out / name / split_name(split), ec);
      if (ec) throw IoError("cannot create directories under " + out.string() + ": " + ec.message());
    }
    for (std::size_t i = 0; i < count; ++i) {
      Clip clip = synthesize_clip(s, split, i);
      ClipRecord r{split, clip.id,
                   m.class_names[clip.label] + "/" + split_name(split) + "/" + clip.id, clip.label};
      const auto stem = (out / r.stem).string();
      write_frames(stem + ".frames", clip.frames, s.timesteps, s.height, s.width);
      write_wav16(stem + ".wav16k", clip.waveform, s.sample_rate);
      m.records.push_back(std::move(r));
    }
  }
  save_manifest(m);
  return m;
}

}  // namespace avsr::data
