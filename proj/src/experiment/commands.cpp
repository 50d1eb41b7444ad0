// SPDX-License-Identifier: Apache-2.0
#include "avsr/experiment/commands.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "avsr/ad/gradcheck_suite.hpp"
#include "avsr/core/error.hpp"
#include "avsr/data/synthetic.hpp"
#include "avsr/nn/gradcheck_layers.hpp"
#include "avsr/train/checkpoint.hpp"

namespace avsr::experiment {

namespace fs = std::filesystem;
using models::Modality;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("write failed for " + p.string());
}

std::string synthetic_canonical(const data::SyntheticSpec& spec) {
  std::ostringstream os;
  os.precision(17);
  os << "classes=" << spec.classes << ";split=" << spec.train << "," << spec.val << "," << spec.test
     << ";extents=" << spec.timesteps << "," << spec.height << "," << spec.width << "," << spec.audio_length << ","
     << spec.sample_rate << ";consistency=" << spec.consistency << ";noise=" << spec.video_noise << ","
     << spec.audio_noise << "," << spec.test_noise << ";distractors=" << spec.distractors << ";seed=" << spec.seed
     << ";frequencies=";
  for (double f : spec.frequencies) os << f << ",";
  os << ";trajectories=";
  for (const auto& t : spec.trajectories) {
    for (double v : t) os << v << ",";
    os << "/";
  }
  return os.str();
}

void print_counts(const data::DatasetManifest& m, std::ostream& log) {
  log << "classes " << m.class_names.size() << ", train " << m.count(data::Split::kTrain) << ", val "
      << m.count(data::Split::kVal) << ", test " << m.count(data::Split::kTest) << "\n";
}

// Model config with the dataset's extents, validated.
models::ModelConfig model_for(const ExperimentConfig& cfg, const data::Extents& extents) {
  models::ModelConfig m = cfg.model;
  adopt_extents(m, extents);
  m.validate();
  return m;
}

void check_file(const fs::path& p, const std::string& key) {
  if (!fs::exists(p)) throw IoError(key + " " + p.string() + " does not exist");
}

std::string fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

fs::path cmd_gen_data(const ExperimentConfig& cfg, const fs::path& out, std::ostream& log) {
  cfg.synthetic.validate();
  const data::DatasetManifest m = data::generate_synthetic(cfg.synthetic, out);
  log << "wrote " << (out / data::kManifestFile).string() << ": ";
  print_counts(m, log);
  return out / data::kManifestFile;
}

data::DatasetManifest resolve_dataset(const ExperimentConfig& cfg, std::ostream& log) {
  if (!cfg.manifest.empty()) return data::load_manifest(cfg.manifest);
  const fs::path dir = cfg.output / "data";
  const std::string stamp = synthetic_canonical(cfg.synthetic);
  if (fs::exists(dir / data::kManifestFile) && fs::exists(dir / "spec.txt") && read_text(dir / "spec.txt") == stamp) {
    return data::load_manifest(dir);
  }
  log << "generating synthetic data under " << dir.string() << "\n";
  cmd_gen_data(cfg, dir, log);
  write_text(dir / "spec.txt", stamp);
  return data::load_manifest(dir);
}

TrainOutputs cmd_train(const ExperimentConfig& cfg, Modality modality, std::ostream& log) {
  if (modality == Modality::kFused) {
    std::vector<std::string> missing;
    if (cfg.audio_checkpoint.empty()) missing.push_back("checkpoint.audio");
    if (cfg.video_checkpoint.empty()) missing.push_back("checkpoint.video");
    if (!missing.empty()) {
      std::string names = missing[0];
      if (missing.size() > 1) names += " and " + missing[1];
      throw UsageError("fused training needs stream checkpoints; set " + names + " in the config");
    }
    check_file(cfg.audio_checkpoint, "checkpoint.audio");
    check_file(cfg.video_checkpoint, "checkpoint.video");
  }
  cfg.train.validate();
  const data::DatasetManifest manifest = resolve_dataset(cfg, log);
  const models::ModelConfig model = model_for(cfg, manifest.extents);
  const data::ClipSet train = data::load_split(manifest, data::Split::kTrain);
  const data::ClipSet val = data::load_split(manifest, data::Split::kVal);

  train::TrainHooks hooks;
  hooks.on_record = [&](const train::MetricRecord& r) {
    log << r.stage << " epoch " << r.epoch << " " << data::split_name(r.split) << " loss " << fixed(r.loss)
        << " acc " << fixed(r.accuracy) << " lr " << r.lr << "\n";
  };
  train::TrainResult result;
  if (modality == Modality::kFused) {
    const auto audio = train::read_checkpoint(cfg.audio_checkpoint);
    const auto video = train::read_checkpoint(cfg.video_checkpoint);
    result = train::train_fused(train, val, audio, video, model, cfg.train, hooks);
  } else {
    result = train::train_stream(train, val, modality, model, cfg.train, hooks);
  }

  TrainOutputs out;
  const std::string name = models::modality_name(modality);
  out.checkpoint = cfg.output / (name + ".ckpt");
  out.metrics = cfg.output / (name + ".log");
  std::error_code ec;
  fs::create_directories(cfg.output, ec);
  train::write_checkpoint(result.best, out.checkpoint);
  write_text(out.metrics, result.log.str());
  out.epochs = result.total_epochs;
  out.best_val = result.best.meta.metric;
  log << "checkpoint " << out.checkpoint.string() << " (best val accuracy " << fixed(out.best_val) << ", "
      << out.epochs << " epochs)\nmetrics " << out.metrics.string() << "\n";
  return out;
}

Modality checkpoint_modality(const train::Checkpoint& ckpt) {
  bool frontend = false;
  for (const auto& [name, _] : ckpt.state.entries) {
    if (name.starts_with("fusion.")) return Modality::kFused;
    frontend = frontend || name.starts_with("frontend.");
  }
  return frontend ? Modality::kVideo : Modality::kAudio;
}

train::EvalResult cmd_eval(const ExperimentConfig& cfg, const fs::path& ckpt_path, const fs::path& manifest_path,
                           data::Split split, std::ostream& out) {
  const train::Checkpoint ckpt = train::read_checkpoint(ckpt_path);
  const data::DatasetManifest manifest = data::load_manifest(manifest_path);
  const Modality modality = checkpoint_modality(ckpt);
  const models::ModelConfig model_cfg = model_for(cfg, manifest.extents);
  auto model = models::make_model(modality, model_cfg, 0);
  try {
    train::apply_checkpoint(ckpt, *model);
  } catch (const CheckpointError& e) {
    throw CheckpointError(ckpt_path.string() + " does not fit " + manifest_path.string() + " (" +
                          std::to_string(manifest.extents.classes) + " classes): " + e.what());
  }
  const data::ClipSet set = data::load_split(manifest, split);
  const train::EvalResult r = train::evaluate(*model, set, cfg.train.eval_batch);

  out << models::modality_name(modality) << " model, " << data::split_name(split) << " split, " << r.count
      << " clips\naccuracy " << fixed(r.accuracy) << "\nloss " << fixed(r.loss) << "\nper-class accuracy\n";
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    out << "  " << manifest.class_names[c] << " "
        << (std::isnan(r.per_class[c]) ? std::string("-") : fixed(r.per_class[c])) << "\n";
  }
  out << "confusion (rows truth, columns prediction)\n";
  for (const auto& row : r.confusion) {
    out << " ";
    for (std::size_t n : row) out << " " << n;
    out << "\n";
  }
  return r;
}

// ---- ablation -------------------------------------------------------------------

namespace {

struct Cell {
  Modality modality;
  bool attention;
  bool noise;
  int depth;

  auto operator<=>(const Cell&) const = default;
  Cell with(Modality m) const { return {m, attention, noise, depth}; }
  std::string label() const {
    return std::string(models::modality_name(modality)) + " attention=" + (attention ? "on" : "off") +
           " noise=" + (noise ? "on" : "off") + " depth=" + std::to_string(depth);
  }
};

constexpr Cell kBaseline{Modality::kAudio, true, false, 18};

const char* row_name(Modality m) {
  switch (m) {
    case Modality::kAudio: return "Audio";
    case Modality::kVideo: return "Visual";
    default: return "AudioVisual";
  }
}

// Published large-scale accuracies, indexed [modality][setting].
std::optional<double> published(const std::string& table, Modality m, const std::string& column) {
  static const std::map<std::string, std::map<std::string, std::array<double, 3>>> values = {
      {"attention", {{"without attention", {0.9594, 0.8290, 0.9743}}, {"with attention", {0.9702, 0.8617, 0.9823}}}},
      {"noise", {{"without noise", {0.9702, 0.8617, 0.9823}}, {"with noise", {0.9792, 0.8642, 0.9864}}}},
      {"depth", {{"ResNet-18", {0.9702, 0.8617, 0.9823}}, {"ResNet-34", {0.9720, 0.8624, 0.9842}}}},
      {"overall",
       {{"without attention", {0.9594, 0.8290, 0.9743}},
        {"with attention", {0.9702, 0.8617, 0.9823}},
        {"with attention and noise", {0.9792, 0.8642, 0.9864}}}},
  };
  const auto t = values.find(table);
  if (t == values.end()) return std::nullopt;
  const auto c = t->second.find(column);
  if (c == t->second.end()) return std::nullopt;
  return c->second[static_cast<std::size_t>(m)];
}

struct TableSpec {
  std::string id, title;
  std::vector<std::pair<std::string, Cell>> columns;  // column label, cell with modality unset
};

std::vector<TableSpec> table_specs(const AblationAxes& axes) {
  std::vector<TableSpec> specs;
  TableSpec attention{"attention", "Attention ablation", {}};
  for (bool a : axes.attention) {
    Cell c = kBaseline;
    c.attention = a;
    attention.columns.emplace_back(a ? "with attention" : "without attention", c);
  }
  TableSpec noise{"noise", "Noise augmentation ablation", {}};
  for (bool n : axes.noise) {
    Cell c = kBaseline;
    c.noise = n;
    noise.columns.emplace_back(n ? "with noise" : "without noise", c);
  }
  TableSpec depth{"depth", "Backbone depth ablation", {}};
  for (int d : axes.depth) {
    Cell c = kBaseline;
    c.depth = d;
    depth.columns.emplace_back("ResNet-" + std::to_string(d), c);
  }
  TableSpec overall{"overall", "Overall comparison", {}};
  const auto has = [](const auto& v, auto x) { return std::find(v.begin(), v.end(), x) != v.end(); };
  if (has(axes.attention, false)) overall.columns.emplace_back("without attention", Cell{Modality::kAudio, false, false, 18});
  overall.columns.emplace_back("with attention", kBaseline);
  if (has(axes.noise, true)) overall.columns.emplace_back("with attention and noise", Cell{Modality::kAudio, true, true, 18});
  specs = {attention, noise, depth, overall};
  return specs;
}

class AblationRunner {
 public:
  AblationRunner(const ExperimentConfig& cfg, std::ostream& out) : cfg_(cfg), out_(out) {
    manifest_ = resolve_dataset(cfg, out);
    data_id_ = train::digest_hex(train::sha256(read_text(manifest_.root / data::kManifestFile)));
  }

  // Test accuracy of a cell, empty when it (or a stream it needs) diverged.
  std::optional<double> accuracy(const Cell& cell) {
    if (const auto it = done_.find(cell); it != done_.end()) return it->second.accuracy;
    const Outcome o = run(cell);
    done_[cell] = o;
    return o.accuracy;
  }

  std::size_t trained() const { return trained_; }

 private:
  struct Outcome {
    std::optional<double> accuracy;
    std::optional<train::Checkpoint> checkpoint;
  };

  ExperimentConfig cell_config(const Cell& cell) const {
    ExperimentConfig c = cfg_;
    c.model.attention = {cell.attention, cell.attention, cell.attention};
    c.model.video_depth = c.model.audio_depth = cell.depth;
    c.train.augment.enabled = cell.noise;
    return c;
  }

  const data::ClipSet& split(data::Split s) {
    auto& slot = splits_[static_cast<int>(s)];
    if (!slot) slot = data::load_split(manifest_, s);
    return *slot;
  }

  Outcome run(const Cell& cell) {
    const ExperimentConfig c = cell_config(cell);
    const models::ModelConfig model = model_for(c, manifest_.extents);
    c.train.validate();
    const std::string key = train::digest_hex(train::sha256(
        model.canonical() + "|" + models::modality_name(cell.modality) + "|" + c.train.canonical() + "|" + data_id_));
    const fs::path dir = cfg_.output / "cells" / key.substr(0, 16);
    const fs::path ckpt_path = dir / "model.ckpt", result_path = dir / "result.txt";

    Outcome o;
    if (fs::exists(ckpt_path) && fs::exists(result_path)) {
      std::istringstream in(read_text(result_path));
      std::string word;
      double acc = 0.0;
      if (in >> word >> acc && word == "accuracy") {
        o.checkpoint = train::read_checkpoint(ckpt_path);
        o.accuracy = acc;
        out_ << "cached  " << cell.label() << "  accuracy " << fixed(acc) << "\n";
        return o;
      }
    }

    std::optional<train::Checkpoint> audio, video;
    if (cell.modality == Modality::kFused) {
      audio = stream(cell.with(Modality::kAudio));
      video = stream(cell.with(Modality::kVideo));
      if (!audio || !video) {
        out_ << "skipped " << cell.label() << "  (a stream failed)\n";
        return o;
      }
    }
    out_ << "train   " << cell.label() << "\n" << std::flush;
    ++trained_;
    try {
      train::TrainResult r = cell.modality == Modality::kFused
                                 ? train::train_fused(split(data::Split::kTrain), split(data::Split::kVal), *audio,
                                                      *video, model, c.train)
                                 : train::train_stream(split(data::Split::kTrain), split(data::Split::kVal),
                                                       cell.modality, model, c.train);
      const train::EvalResult e = train::evaluate(*r.model, split(data::Split::kTest), c.train.eval_batch);
      std::error_code ec;
      fs::create_directories(dir, ec);
      train::write_checkpoint(r.best, ckpt_path);
      write_text(dir / "metrics.log", r.log.str());
      write_text(dir / "config.txt", model.canonical() + "\n" + c.train.canonical() + "\n" + cell.label() + "\n");
      write_text(result_path, "accuracy " + fixed(e.accuracy, 17) + "\n");
      o.accuracy = e.accuracy;
      o.checkpoint = std::move(r.best);
      out_ << "        " << cell.label() << "  accuracy " << fixed(e.accuracy) << " after " << r.total_epochs
           << " epochs\n";
    } catch (const TrainingError& e) {
      out_ << "failed  " << cell.label() << ": " << e.what() << "\n";
    }
    return o;
  }

  std::optional<train::Checkpoint> stream(const Cell& cell) {
    if (const auto it = done_.find(cell); it != done_.end()) return it->second.checkpoint;
    Outcome o = run(cell);
    done_[cell] = o;
    return o.checkpoint;
  }

  const ExperimentConfig& cfg_;
  std::ostream& out_;
  data::DatasetManifest manifest_;
  std::string data_id_;
  std::optional<data::ClipSet> splits_[3];
  std::map<Cell, Outcome> done_;
  std::size_t trained_ = 0;
};

}  // namespace

AblationReport cmd_ablate(const ExperimentConfig& cfg, std::ostream& out) {
  cfg.train.validate();
  AblationRunner runner(cfg, out);
  AblationReport report;
  std::set<Cell> failed;
  for (const TableSpec& spec : table_specs(cfg.axes)) {
    ResultTable t;
    t.id = spec.id;
    t.title = spec.title;
    for (Modality m : cfg.axes.modalities) t.rows.push_back(row_name(m));
    for (const auto& [label, _] : spec.columns) t.columns.push_back(label);
    for (Modality m : cfg.axes.modalities) {
      for (const auto& [label, base] : spec.columns) {
        const Cell cell = base.with(m);
        const auto acc = runner.accuracy(cell);
        if (!acc) failed.insert(cell);
        t.add({row_name(m), label, acc, published(spec.id, m, label)});
      }
    }
    report.tables.push_back(std::move(t));
  }
  report.trained = runner.trained();
  report.failed = failed.size();

  std::ostringstream text, lines;
  for (const auto& t : report.tables) text << "\n" << t.text();
  write_lines(lines, report.tables);
  write_text(cfg.output / "tables.txt", text.str());
  write_text(cfg.output / "results.tsv", lines.str());
  out << text.str() << "\n" << report.trained << " runs trained, " << report.failed << " failed cells\n"
      << "tables " << (cfg.output / "tables.txt").string() << "\nresults " << (cfg.output / "results.tsv").string()
      << "\n";
  return report;
}

// ---- gradient checks ---------------------------------------------------------------

GradcheckScope parse_gradcheck_scope(const std::string& s) {
  if (s == "op") return GradcheckScope::kOp;
  if (s == "layer") return GradcheckScope::kLayer;
  if (s == "model") return GradcheckScope::kModel;
  throw UsageError("unknown gradcheck scope '" + s + "' (op, layer or model)");
}

bool cmd_gradcheck(const GradcheckRequest& req, std::ostream& out) {
  ad::GradCheckOptions opt;
  opt.seed = req.seed;
  opt.fault_param = req.fault_param;
  std::vector<ad::GradCheckCase> cases;
  if (req.scope == GradcheckScope::kOp) {
    cases = ad::op_gradcheck_cases();
  } else if (req.scope == GradcheckScope::kLayer) {
    cases = nn::layer_gradcheck_cases();
  } else {
    const Modality m = req.modality;
    const std::size_t coords = req.coordinates;
    cases.push_back({std::string("model/") + models::modality_name(m), [m, coords](const ad::GradCheckOptions& o) {
                       auto model = models::make_model(m, models::ModelConfig::tiny(), o.seed + 38);
                       return models::model_grad_check(*model, 2, coords, o);
                     }});
  }
  std::size_t failed = 0;
  for (const auto& c : cases) {
    const ad::GradCheckReport r = c.run(opt);
    failed += !r.pass;
    out << (r.pass ? "pass " : "FAIL ") << c.name << "  max_rel_error " << r.max_rel_error << "  probes "
        << r.probe_count;
    if (r.kinked) out << "  kinked " << r.kinked;
    if (r.unverified) out << "  unverified " << r.unverified;
    if (!r.pass) {
      out << "  failing:";
      for (const auto& n : r.failures()) out << " " << n;
    }
    out << "\n";
  }
  out << cases.size() << " checks, " << failed << " failed\n";
  return failed == 0;
}

}  // namespace avsr::experiment
