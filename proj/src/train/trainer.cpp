// SPDX-License-Identifier: Apache-2.0
#include "avsr/train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "avsr/ad/tape.hpp"
#include "avsr/core/error.hpp"

namespace avsr::train {

using models::Modality;
using models::SequenceModel;

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = seed ^ (a * 0x9e3779b97f4a7c15ull) ^ (b * 0xc2b2ae3d27d4eb4full);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

models::ModelInput input_of(const data::Batch& b) { return {b.video, b.audio}; }

// Correct sequence labels in a [B,T,C] probability batch.
std::size_t count_correct(const Tensor& probs, const std::vector<int>& labels) {
  const std::size_t t = probs.dim(1), c = probs.dim(2);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = probs.data().subspan(i * t * c, t * c);
    correct += models::classify_sequence(row, t, c).first == labels[i];
  }
  return correct;
}

void check_extents(const data::ClipSet& set, const models::ModelConfig& cfg) {
  const auto& e = set.extents;
  if (e.timesteps != cfg.timesteps || e.height != cfg.height || e.width != cfg.width ||
      e.audio_length != cfg.audio_length || e.classes != cfg.classes) {
    throw ConfigError(std::string("the ") + data::split_name(set.split) + " split has T=" +
                      std::to_string(e.timesteps) + " H=" + std::to_string(e.height) + " W=" +
                      std::to_string(e.width) + " L=" + std::to_string(e.audio_length) + " C=" +
                      std::to_string(e.classes) + ", the model expects " + cfg.canonical());
  }
}

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

class StageRunner {
 public:
  StageRunner(SequenceModel& model, const data::ClipSet& train, const data::ClipSet& val,
              const TrainConfig& tcfg, const TrainHooks& hooks, TrainResult& result)
      : model_(model), train_(train), val_(val), tcfg_(tcfg), hooks_(hooks), result_(result) {}

  // Runs one stage on the currently trainable parameters. With early
  // stopping the best epoch's weights are restored at the end.
  StageSummary run(const std::string& name, std::size_t max_epochs, bool early_stop, ScheduleKind schedule) {
    if (hooks_.on_stage_begin) hooks_.on_stage_begin(name, model_);
    Adam opt = Adam::for_module(model_);
    if (opt.slots().empty()) throw UsageError("stage " + name + " has no trainable parameters");
    const LrSchedule sched{schedule, tcfg_.decay_factor, tcfg_.decay_period};
    EarlyStop stop(tcfg_.patience);
    nn::StateDict best_state;
    StageSummary summary{name, 0, -1, 0.0};
    const std::uint64_t stage_index = result_.stages.size();
    for (std::size_t epoch = 0; epoch < max_epochs; ++epoch) {
      const GroupRates rates = sched.at(tcfg_.rates, epoch);
      const EpochStats stats = train_epoch(opt, rates, mix_seed(tcfg_.seed, stage_index + 1, epoch), name, epoch);
      const EvalResult v = evaluate(model_, val_, tcfg_.eval_batch);
      record({name, epoch, data::Split::kTrain, stats.loss, stats.accuracy, rates.base});
      record({name, epoch, data::Split::kVal, v.loss, v.accuracy, rates.base});
      ++summary.epochs;
      ++result_.total_epochs;
      summary.best_val = v.accuracy;
      if (early_stop) {
        if (stop.observe(epoch, v.accuracy)) {
          best_state = nn::state_dict(model_);
          best_global_epoch_ = result_.total_epochs - 1;
        }
        if (stop.should_stop(epoch)) break;
      } else {
        best_global_epoch_ = result_.total_epochs - 1;
      }
    }
    if (early_stop && stop.has_best()) {
      nn::load_state_dict(model_, best_state);
      summary.best_epoch = stop.best_epoch();
      summary.best_val = stop.best();
    }
    if (hooks_.on_stage_end) hooks_.on_stage_end(name, model_);
    result_.stages.push_back(summary);
    return summary;
  }

  std::size_t best_global_epoch() const { return best_global_epoch_; }

 private:
  EpochStats train_epoch(Adam& opt, const GroupRates& rates, std::uint64_t shuffle_seed,
                         const std::string& stage, std::size_t epoch) {
    model_.set_training(true);
    data::BatchIterator it(train_, tcfg_.batch_size, shuffle_seed, tcfg_.augment);
    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0, step = 0;
    while (!it.done()) {
      const data::Batch b = it.next();
      const auto where = [&] {
        return "stage " + stage + ", epoch " + std::to_string(epoch) + ", step " + std::to_string(step) + ": ";
      };
      ad::Tape tape;
      ad::TapeScope scope(tape);
      Tensor probs, loss;
      try {
        loss = model_.loss(input_of(b), b.labels, &probs);
      } catch (const EvaluationError& e) {
        throw TrainingError(where() + "diverged (" + e.what() + ")");
      }
      if (!std::isfinite(loss.item())) throw TrainingError(where() + "non-finite loss");
      opt.zero_grad();
      try {
        ad::backward(loss);
      } catch (const EvaluationError& e) {
        throw TrainingError(where() + "diverged in backward (" + e.what() + ")");
      }
      const double norm = clip_grad_norm(opt.slots(), tcfg_.clip_norm);
      if (!std::isfinite(norm)) throw TrainingError(where() + "non-finite gradient");
      opt.step(rates);
      loss_sum += loss.item() * static_cast<double>(b.size());
      correct += count_correct(probs, b.labels);
      seen += b.size();
      ++step;
    }
    opt.zero_grad();
    return {loss_sum / static_cast<double>(seen), static_cast<double>(correct) / static_cast<double>(seen)};
  }

  void record(const MetricRecord& r) {
    result_.log.records.push_back(r);
    if (hooks_.on_record) hooks_.on_record(r);
  }

  SequenceModel& model_;
  const data::ClipSet& train_;
  const data::ClipSet& val_;
  const TrainConfig& tcfg_;
  const TrainHooks& hooks_;
  TrainResult& result_;
  std::size_t best_global_epoch_ = 0;
};

}  // namespace

TrainConfig TrainConfig::tiny() {
  TrainConfig t;
  t.batch_size = 16;
  t.rates = {1e-3, 2e-3};
  t.augment.enabled = false;
  return t;
}

TrainConfig TrainConfig::paper() {
  TrainConfig t;
  t.batch_size = 32;
  t.rates = {1e-4, 2e-4};
  t.stage1_max_epochs = 100;
  t.stage3_max_epochs = 100;
  t.phase_b_max_epochs = 100;
  return t;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& why) { throw ConfigError("train config: " + why); };
  if (batch_size == 0 || eval_batch == 0) fail("batch sizes must be at least 1");
  if (!(rates.base > 0.0 && std::isfinite(rates.base)) || !(rates.attention > 0.0 && std::isfinite(rates.attention))) {
    fail("learning rates must be positive");
  }
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) fail("decay factor must lie in (0,1]");
  if (decay_period == 0) fail("decay period must be at least 1");
  if (stage1_max_epochs == 0 || stage2_epochs == 0 || stage3_max_epochs == 0 || phase_a_epochs == 0 ||
      phase_b_max_epochs == 0) {
    fail("every stage needs at least one epoch");
  }
  if (!std::isfinite(clip_norm)) fail("clip norm must be finite");
  if (!(augment.probability >= 0.0 && augment.probability <= 1.0)) fail("augmentation probability must lie in [0,1]");
  if (!(augment.audio_noise >= 0.0)) fail("augmentation noise must be non-negative");
}

std::string TrainConfig::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "batch=" << batch_size << ";lr=" << rates.base << "," << rates.attention
     << ";schedule=" << schedule_name(stream_schedule) << "," << schedule_name(fused_schedule)
     << ";decay=" << decay_factor << "/" << decay_period << ";patience=" << patience << ";clip=" << clip_norm
     << ";epochs=" << stage1_max_epochs << "," << stage2_epochs << "," << stage3_max_epochs << ","
     << phase_a_epochs << "," << phase_b_max_epochs << ";augment=" << augment.enabled << ","
     << augment.probability << "," << augment.crop_margin << "," << augment.audio_noise
     << ";eval_batch=" << eval_batch << ";seed=" << seed;
  return os.str();
}

void MetricLog::write(std::ostream& out) const {
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%s %zu %s %.17g %.17g %.17g\n", r.stage.c_str(), r.epoch,
                  data::split_name(r.split), r.loss, r.accuracy, r.lr);
    out << buf;
  }
}

std::string MetricLog::str() const {
  std::ostringstream os;
  write(os);
  return os.str();
}

MetricLog MetricLog::parse(std::istream& in) {
  MetricLog log;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    MetricRecord r;
    std::string split, extra;
    if (!(ls >> r.stage >> r.epoch >> split >> r.loss >> r.accuracy >> r.lr) || (ls >> extra)) {
      throw FormatError("metric log line " + std::to_string(lineno) + " is malformed");
    }
    r.split = data::parse_split(split);
    log.records.push_back(std::move(r));
  }
  return log;
}

EvalResult evaluate(SequenceModel& model, const data::ClipSet& set, std::size_t batch_size) {
  if (set.empty()) throw EmptyDatasetError(std::string("cannot evaluate on the empty ") + data::split_name(set.split) + " split");
  const std::size_t classes = model.config().classes;
  if (set.extents.classes != classes) {
    throw ConfigError("split has " + std::to_string(set.extents.classes) + " classes, the model " +
                      std::to_string(classes));
  }
  const bool was_training = model.training();
  model.set_training(false);
  ad::NoGradGuard no_grad;
  EvalResult r;
  r.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  double loss_sum = 0.0;
  std::size_t correct = 0;
  data::BatchIterator it(set, batch_size);
  try {
    while (!it.done()) {
      const data::Batch b = it.next();
      Tensor probs;
      const Tensor loss = model.loss(input_of(b), b.labels, &probs);
      loss_sum += loss.item() * static_cast<double>(b.size());
      const std::size_t t = probs.dim(1), c = probs.dim(2);
      for (std::size_t i = 0; i < b.size(); ++i) {
        const int pred = models::classify_sequence(probs.data().subspan(i * t * c, t * c), t, c).first;
        ++r.confusion[b.labels[i]][pred];
        correct += pred == b.labels[i];
      }
      r.count += b.size();
    }
  } catch (...) {
    model.set_training(was_training);
    throw;
  }
  model.set_training(was_training);
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.count);
  r.loss = loss_sum / static_cast<double>(r.count);
  r.per_class.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t n = 0;
    for (std::size_t p = 0; p < classes; ++p) n += r.confusion[c][p];
    r.per_class[c] = n ? static_cast<double>(r.confusion[c][c]) / static_cast<double>(n)
                       : std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

TrainResult train_stream(const data::ClipSet& train, const data::ClipSet& val, Modality modality,
                         const models::ModelConfig& cfg, const TrainConfig& tcfg, const TrainHooks& hooks) {
  if (modality == Modality::kFused) throw UsageError("train_stream trains audio or video streams");
  tcfg.validate();
  cfg.validate();
  check_extents(train, cfg);
  check_extents(val, cfg);
  TrainResult result;
  auto owned = std::make_unique<models::StreamModel>(modality, cfg, tcfg.seed);
  models::StreamModel& model = *owned;
  StageRunner runner(model, train, val, tcfg, hooks, result);

  model.set_frozen(false);
  model.set_head(models::StreamHead::kTemporalConv);
  runner.run("stage1", tcfg.stage1_max_epochs, true, tcfg.stream_schedule);

  model.set_head(models::StreamHead::kBgru);
  if (model.frontend()) model.frontend()->set_frozen(true);
  model.backbone().set_frozen(true);
  if (model.attention()) model.attention()->set_frozen(true);
  runner.run("stage2", tcfg.stage2_epochs, false, tcfg.stream_schedule);

  model.set_frozen(false);
  model.set_head(models::StreamHead::kBgru);
  const StageSummary s3 = runner.run("stage3", tcfg.stage3_max_epochs, true, tcfg.stream_schedule);

  result.best = make_checkpoint(model, static_cast<std::uint32_t>(runner.best_global_epoch()), s3.best_val);
  result.model = std::move(owned);
  return result;
}

TrainResult train_fused(const data::ClipSet& train, const data::ClipSet& val, const Checkpoint& audio,
                        const Checkpoint& video, const models::ModelConfig& cfg, const TrainConfig& tcfg,
                        const TrainHooks& hooks) {
  tcfg.validate();
  cfg.validate();
  check_extents(train, cfg);
  check_extents(val, cfg);
  if (audio.meta.digest != config_digest(cfg, Modality::kAudio)) {
    throw CheckpointError("audio stream checkpoint was trained with a different configuration");
  }
  if (video.meta.digest != config_digest(cfg, Modality::kVideo)) {
    throw CheckpointError("video stream checkpoint was trained with a different configuration");
  }
  TrainResult result;
  auto owned = models::init_fused_from_streams(audio.state, video.state, cfg, tcfg.seed);
  models::FusedModel& model = *owned;
  StageRunner runner(model, train, val, tcfg, hooks, result);

  model.set_streams_frozen(true);
  runner.run("phaseA", tcfg.phase_a_epochs, false, ScheduleKind::kConstant);

  model.set_streams_frozen(false);
  const StageSummary b = runner.run("phaseB", tcfg.phase_b_max_epochs, true, tcfg.fused_schedule);

  result.best = make_checkpoint(model, static_cast<std::uint32_t>(runner.best_global_epoch()), b.best_val);
  result.model = std::move(owned);
  return result;
}

}  // namespace avsr::train
