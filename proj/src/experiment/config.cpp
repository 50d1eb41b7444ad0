// SPDX-License-Identifier: Apache-2.0
#include "avsr/experiment/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "avsr/core/error.hpp"

namespace avsr::experiment {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

// Value parsers throw std::invalid_argument with a short reason; the caller
// adds the location.
std::uint64_t to_u64(const std::string& v) {
  std::uint64_t x = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || end != v.data() + v.size() || v.empty()) {
    throw std::invalid_argument("expected a non-negative integer");
  }
  return x;
}

std::size_t to_count(const std::string& v) { return static_cast<std::size_t>(to_u64(v)); }

double to_double(const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty() || !std::isfinite(x)) throw std::invalid_argument("expected a finite number");
  return x;
}

bool to_bool(const std::string& v) {
  if (v == "on" || v == "true" || v == "yes" || v == "1") return true;
  if (v == "off" || v == "false" || v == "no" || v == "0") return false;
  throw std::invalid_argument("expected on/off");
}

int to_depth(const std::string& v) {
  const auto d = to_u64(v);
  if (d != 18 && d != 34) throw std::invalid_argument("depth must be 18 or 34");
  return static_cast<int>(d);
}

models::Modality to_modality(const std::string& v) {
  if (v == "audio") return models::Modality::kAudio;
  if (v == "video") return models::Modality::kVideo;
  if (v == "fused") return models::Modality::kFused;
  throw std::invalid_argument("expected audio, video or fused");
}

template <typename T, typename F>
std::vector<T> to_list(const std::string& v, F one) {
  std::vector<T> out;
  for (const auto& item : split_list(v)) {
    T x = one(item);
    if (std::find(out.begin(), out.end(), x) != out.end()) throw std::invalid_argument("repeated value " + item);
    out.push_back(x);
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::filesystem::path&)>;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& v) {
  if (v.empty()) throw std::invalid_argument("empty path");
  const std::filesystem::path p(v);
  return p.is_absolute() || base.empty() ? p : base / p;
}

// Ordered so config_keys() reads like documentation.
const std::vector<std::pair<std::string, Setter>>& setters() {
  using C = ExperimentConfig;
  using P = std::filesystem::path;
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"seed", [](C& c, const std::string& v, const P&) { c.seed = to_u64(v); }},
      {"output.dir", [](C& c, const std::string& v, const P& b) { c.output = resolve(b, v); }},
      {"data.manifest", [](C& c, const std::string& v, const P& b) { c.manifest = resolve(b, v); }},
      {"data.synthetic.classes", [](C& c, const std::string& v, const P&) { c.synthetic.classes = to_count(v); }},
      {"data.synthetic.train", [](C& c, const std::string& v, const P&) { c.synthetic.train = to_count(v); }},
      {"data.synthetic.val", [](C& c, const std::string& v, const P&) { c.synthetic.val = to_count(v); }},
      {"data.synthetic.test", [](C& c, const std::string& v, const P&) { c.synthetic.test = to_count(v); }},
      {"data.synthetic.timesteps", [](C& c, const std::string& v, const P&) { c.synthetic.timesteps = to_count(v); }},
      {"data.synthetic.height", [](C& c, const std::string& v, const P&) { c.synthetic.height = to_count(v); }},
      {"data.synthetic.width", [](C& c, const std::string& v, const P&) { c.synthetic.width = to_count(v); }},
      {"data.synthetic.audio_length",
       [](C& c, const std::string& v, const P&) { c.synthetic.audio_length = to_count(v); }},
      {"data.synthetic.sample_rate",
       [](C& c, const std::string& v, const P&) {
         const auto r = to_u64(v);
         if (r > 0xffffffffu) throw std::invalid_argument("sample rate out of range");
         c.synthetic.sample_rate = static_cast<std::uint32_t>(r);
       }},
      {"data.synthetic.consistency", [](C& c, const std::string& v, const P&) { c.synthetic.consistency = to_double(v); }},
      {"data.synthetic.video_noise", [](C& c, const std::string& v, const P&) { c.synthetic.video_noise = to_double(v); }},
      {"data.synthetic.audio_noise", [](C& c, const std::string& v, const P&) { c.synthetic.audio_noise = to_double(v); }},
      {"data.synthetic.test_noise", [](C& c, const std::string& v, const P&) { c.synthetic.test_noise = to_double(v); }},
      {"data.synthetic.distractors", [](C& c, const std::string& v, const P&) { c.synthetic.distractors = to_bool(v); }},
      {"data.synthetic.seed", [](C& c, const std::string& v, const P&) { c.synthetic.seed = to_u64(v); }},
      {"model.profile", [](C&, const std::string&, const P&) {}},  // applied before everything else
      {"model.depth.video", [](C& c, const std::string& v, const P&) { c.model.video_depth = to_depth(v); }},
      {"model.depth.audio", [](C& c, const std::string& v, const P&) { c.model.audio_depth = to_depth(v); }},
      {"model.gru.hidden", [](C& c, const std::string& v, const P&) { c.model.gru_hidden = to_count(v); }},
      {"model.gru.layers", [](C& c, const std::string& v, const P&) { c.model.gru_layers = to_count(v); }},
      {"model.attention.video", [](C& c, const std::string& v, const P&) { c.model.attention.video = to_bool(v); }},
      {"model.attention.audio", [](C& c, const std::string& v, const P&) { c.model.attention.audio = to_bool(v); }},
      {"model.attention.combined",
       [](C& c, const std::string& v, const P&) { c.model.attention.combined = to_bool(v); }},
      {"model.frontend_channels", [](C& c, const std::string& v, const P&) { c.model.frontend_channels = to_count(v); }},
      {"model.stage_widths",
       [](C& c, const std::string& v, const P&) {
         c.model.stage_widths.clear();
         for (const auto& w : split_list(v)) c.model.stage_widths.push_back(to_count(w));
       }},
      {"model.backend_width", [](C& c, const std::string& v, const P&) { c.model.backend_width = to_count(v); }},
      {"train.batch_size", [](C& c, const std::string& v, const P&) { c.train.batch_size = to_count(v); }},
      {"train.eval_batch_size", [](C& c, const std::string& v, const P&) { c.train.eval_batch = to_count(v); }},
      {"train.lr.base", [](C& c, const std::string& v, const P&) { c.train.rates.base = to_double(v); }},
      {"train.lr.attention", [](C& c, const std::string& v, const P&) { c.train.rates.attention = to_double(v); }},
      {"train.schedule.stream",
       [](C& c, const std::string& v, const P&) { c.train.stream_schedule = train::parse_schedule(v); }},
      {"train.schedule.fused",
       [](C& c, const std::string& v, const P&) { c.train.fused_schedule = train::parse_schedule(v); }},
      {"train.decay.factor", [](C& c, const std::string& v, const P&) { c.train.decay_factor = to_double(v); }},
      {"train.decay.period", [](C& c, const std::string& v, const P&) { c.train.decay_period = to_count(v); }},
      {"train.patience", [](C& c, const std::string& v, const P&) { c.train.patience = to_count(v); }},
      {"train.clip_norm", [](C& c, const std::string& v, const P&) { c.train.clip_norm = to_double(v); }},
      {"train.epochs.stage1", [](C& c, const std::string& v, const P&) { c.train.stage1_max_epochs = to_count(v); }},
      {"train.epochs.stage2", [](C& c, const std::string& v, const P&) { c.train.stage2_epochs = to_count(v); }},
      {"train.epochs.stage3", [](C& c, const std::string& v, const P&) { c.train.stage3_max_epochs = to_count(v); }},
      {"train.epochs.phase_a", [](C& c, const std::string& v, const P&) { c.train.phase_a_epochs = to_count(v); }},
      {"train.epochs.phase_b", [](C& c, const std::string& v, const P&) { c.train.phase_b_max_epochs = to_count(v); }},
      {"train.augment", [](C& c, const std::string& v, const P&) { c.train.augment.enabled = to_bool(v); }},
      {"train.augment.probability",
       [](C& c, const std::string& v, const P&) { c.train.augment.probability = to_double(v); }},
      {"train.augment.crop_margin",
       [](C& c, const std::string& v, const P&) { c.train.augment.crop_margin = to_count(v); }},
      {"train.augment.audio_noise",
       [](C& c, const std::string& v, const P&) { c.train.augment.audio_noise = to_double(v); }},
      {"checkpoint.audio", [](C& c, const std::string& v, const P& b) { c.audio_checkpoint = resolve(b, v); }},
      {"checkpoint.video", [](C& c, const std::string& v, const P& b) { c.video_checkpoint = resolve(b, v); }},
      {"ablate.modality",
       [](C& c, const std::string& v, const P&) { c.axes.modalities = to_list<models::Modality>(v, to_modality); }},
      {"ablate.attention", [](C& c, const std::string& v, const P&) { c.axes.attention = to_list<bool>(v, to_bool); }},
      {"ablate.noise", [](C& c, const std::string& v, const P&) { c.axes.noise = to_list<bool>(v, to_bool); }},
      {"ablate.depth", [](C& c, const std::string& v, const P&) { c.axes.depth = to_list<int>(v, to_depth); }},
  };
  return table;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                              const std::string& source) {
  struct Line {
    std::size_t number;
    std::string key, value;
  };
  std::vector<Line> lines;
  std::map<std::string, std::size_t> seen;
  std::istringstream in(text);
  std::string raw;
  for (std::size_t n = 1; std::getline(in, raw); ++n) {
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(n);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    Line l{n, trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
    if (l.key.empty()) throw ConfigError(where + ": missing key");
    const auto& table = setters();
    if (std::none_of(table.begin(), table.end(), [&](const auto& s) { return s.first == l.key; })) {
      throw ConfigError(where + ": unknown key '" + l.key + "'");
    }
    if (const auto it = seen.find(l.key); it != seen.end()) {
      throw ConfigError(where + ": '" + l.key + "' already set on line " + std::to_string(it->second));
    }
    seen[l.key] = n;
    lines.push_back(std::move(l));
  }

  ExperimentConfig cfg;
  // The profile resets model and training defaults, so it goes first.
  for (const auto& l : lines) {
    if (l.key != "model.profile") continue;
    try {
      const auto profile = models::parse_profile(l.value);
      const std::size_t classes = cfg.model.classes;
      cfg.model = profile == models::Profile::kPaper ? models::ModelConfig::paper(classes) : models::ModelConfig::tiny(classes);
      cfg.train = profile == models::Profile::kPaper ? train::TrainConfig::paper() : train::TrainConfig::tiny();
    } catch (const UsageError& e) {
      throw ConfigError(source + ":" + std::to_string(l.number) + ": model.profile: " + e.what());
    }
  }
  for (const auto& l : lines) {
    const auto& table = setters();
    const auto it = std::find_if(table.begin(), table.end(), [&](const auto& s) { return s.first == l.key; });
    try {
      it->second(cfg, l.value, base_dir);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(source + ":" + std::to_string(l.number) + ": " + l.key + " = '" + l.value + "': " + e.what());
    } catch (const Error& e) {
      throw ConfigError(source + ":" + std::to_string(l.number) + ": " + l.key + ": " + e.what());
    }
  }
  cfg.train.seed = cfg.seed;
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path(), path.string());
}

void adopt_extents(models::ModelConfig& model, const data::Extents& extents) {
  model.timesteps = extents.timesteps;
  model.height = extents.height;
  model.width = extents.width;
  model.audio_length = extents.audio_length;
  model.classes = extents.classes;
}

}  // namespace avsr::experiment
