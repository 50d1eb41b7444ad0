// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "avsr/ad/ops.hpp"
#include "avsr/ad/tape.hpp"
#include "avsr/core/error.hpp"
#include "avsr/data/synthetic.hpp"
#include "avsr/train/checkpoint.hpp"
#include "avsr/train/optim.hpp"
#include "avsr/train/trainer.hpp"

namespace avsr::train {
namespace {

namespace fs = std::filesystem;
using ad::Tensor;
using models::Modality;
using models::ModelConfig;

// ---- optimizer fixtures ------------------------------------------------------

// Two scalars, one per group.
class TwoGroups : public nn::Module {
 public:
  TwoGroups() {
    base = register_parameter("base", Tensor::from({1}, {0.5}));
    attn = register_parameter("attn", Tensor::from({1}, {0.5}), nn::ParamGroup::kAttention);
  }
  Tensor base, attn;
};

void set_grad(Tensor t, std::vector<double> g) {
  auto dst = t.mutable_grad();
  std::copy(g.begin(), g.end(), dst.begin());
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  TwoGroups m;
  Adam opt = Adam::for_module(m);
  for (int i = 0; i < 3; ++i) {
    set_grad(m.base, {0.0});
    set_grad(m.attn, {0.0});
    opt.step({1e-3, 2e-3});
  }
  EXPECT_EQ(m.base[0], 0.5);
  EXPECT_EQ(m.attn[0], 0.5);
}

TEST(Adam, FirstStepMovesByTheLearningRate) {
  TwoGroups m;
  Adam opt = Adam::for_module(m);
  set_grad(m.base, {1.0});
  set_grad(m.attn, {1.0});
  opt.step({1e-4, 2e-4});
  // m_hat = 1, v_hat = 1 after bias correction.
  EXPECT_NEAR(m.base[0], 0.5 - 1e-4 / (1.0 + 1e-8), 1e-15);
  EXPECT_NEAR(0.5 - m.base[0], 1e-4, 1e-11);
}

TEST(Adam, MatchesTextbookFormula) {
  TwoGroups m;
  Adam opt = Adam::for_module(m);
  const double grads[] = {0.3, -1.2, 0.05, 2.0, -0.7};
  double p = 0.5, mm = 0.0, vv = 0.0;
  for (int t = 1; t <= 5; ++t) {
    const double g = grads[t - 1];
    set_grad(m.base, {g});
    set_grad(m.attn, {g});
    opt.step({1e-2, 2e-2});
    mm = 0.9 * mm + 0.1 * g;
    vv = 0.999 * vv + 0.001 * g * g;
    p -= 1e-2 * (mm / (1 - std::pow(0.9, t))) / (std::sqrt(vv / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(m.base[0], p, 1e-12) << "step " << t;
  }
  EXPECT_EQ(opt.steps(), 5u);
}

TEST(Adam, AttentionGroupStepsTwiceAsFar) {
  TwoGroups m;
  Adam opt = Adam::for_module(m);
  set_grad(m.base, {0.37});
  set_grad(m.attn, {0.37});
  opt.step({1e-4, 2e-4});
  const double ratio = (0.5 - m.attn[0]) / (0.5 - m.base[0]);
  EXPECT_NEAR(ratio, 2.0, 1e-9);
}

TEST(Adam, MissingGradientIsAnOptimizerError) {
  TwoGroups m;
  Adam opt = Adam::for_module(m);
  set_grad(m.base, {1.0});
  try {
    opt.step({1e-3, 1e-3});
    FAIL();
  } catch (const OptimizerError& e) {
    EXPECT_NE(std::string(e.what()).find("attn"), std::string::npos);
  }
}

TEST(Adam, FrozenParameterIgnoresItsGradient) {
  TwoGroups m;
  Adam opt = Adam::for_module(m);
  m.set_frozen(true);
  set_grad(m.base, {5.0});
  set_grad(m.attn, {5.0});
  opt.step({1e-1, 1e-1});
  EXPECT_EQ(m.base[0], 0.5);
  EXPECT_EQ(m.attn[0], 0.5);
  EXPECT_TRUE(Adam::for_module(m).slots().empty());
}

TEST(Adam, GroupsPartitionTheTrainableParameters) {
  auto model = models::make_model(Modality::kFused, ModelConfig::tiny(), 3);
  Adam opt = Adam::for_module(*model);
  std::size_t attention = 0;
  for (const auto& s : opt.slots()) {
    const bool is_attention = s.name.ends_with("attention.raw");
    EXPECT_EQ(s.group == nn::ParamGroup::kAttention, is_attention) << s.name;
    attention += is_attention;
  }
  EXPECT_EQ(attention, 3u);
  EXPECT_EQ(opt.slots().size(), model->parameters().size());
}

TEST(ClipGradNorm, ScalesToTheBound) {
  TwoGroups m;
  Adam opt = Adam::for_module(m);
  set_grad(m.base, {3.0});
  set_grad(m.attn, {4.0});
  EXPECT_DOUBLE_EQ(clip_grad_norm(opt.slots(), 1.0), 5.0);
  EXPECT_NEAR(m.base.grad()[0], 0.6, 1e-15);
  EXPECT_NEAR(m.attn.grad()[0], 0.8, 1e-15);
  EXPECT_NEAR(clip_grad_norm(opt.slots(), 0.0), 1.0, 1e-15);
  EXPECT_NEAR(m.attn.grad()[0], 0.8, 1e-15);
}

// ---- schedule and early stopping ---------------------------------------------

TEST(LrSchedule, StepDecayHalvesEveryTenEpochs) {
  const LrSchedule s{ScheduleKind::kStepDecay, 0.5, 10};
  const GroupRates r0{1e-4, 2e-4};
  EXPECT_EQ(s.at(r0, 0).base, 1e-4);
  EXPECT_EQ(s.at(r0, 9).base, 1e-4);
  EXPECT_EQ(s.at(r0, 10).base, 0.5 * 1e-4);
  EXPECT_EQ(s.at(r0, 10).attention, 0.5 * 2e-4);
  EXPECT_EQ(s.at(r0, 25).base, 0.25 * 1e-4);
  const LrSchedule c{ScheduleKind::kConstant, 0.5, 10};
  EXPECT_EQ(c.at(r0, 40).base, 1e-4);
}

TEST(EarlyStop, FiresAtBestPlusPatiencePlusOne) {
  // Best at epoch 2; ties and smaller values afterwards are no improvement.
  const double script[] = {0.1, 0.4, 0.6, 0.6, 0.5, 0.59, 0.6, 0.3, 0.55, 0.9, 0.95};
  EarlyStop stop(5);
  std::size_t stopped = 0;
  for (std::size_t e = 0; e < std::size(script); ++e) {
    stop.observe(e, script[e]);
    if (stop.should_stop(e)) {
      stopped = e;
      break;
    }
  }
  EXPECT_EQ(stop.best_epoch(), 2);
  EXPECT_EQ(stopped, 2u + 5u + 1u);
}

TEST(EarlyStop, ImprovementResetsTheCount) {
  EarlyStop stop(2);
  stop.observe(0, 0.5);
  stop.observe(1, 0.4);
  stop.observe(2, 0.4);
  EXPECT_FALSE(stop.should_stop(2));
  stop.observe(3, 0.51);
  EXPECT_FALSE(stop.should_stop(5));
  EXPECT_TRUE(stop.should_stop(6));
}

// ---- checkpoints ----------------------------------------------------------------

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("avsr_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

models::ModelInput random_input(const ModelConfig& cfg, std::size_t batch, std::uint64_t seed) {
  Rng rng(seed);
  models::ModelInput in;
  in.video = Tensor::zeros({batch, 1, cfg.timesteps, cfg.height, cfg.width});
  for (double& v : in.video.mutable_data()) v = rng.uniform();
  in.audio = Tensor::zeros({batch, 1, cfg.audio_length});
  for (double& v : in.audio.mutable_data()) v = rng.normal(0.0, 0.3);
  return in;
}

double max_rel_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(a[i]), 1e-12));
  }
  return worst;
}

TEST(Checkpoint, RoundTripKeepsOutputsWithinSinglePrecision) {
  TempDir dir;
  const ModelConfig cfg = ModelConfig::tiny();
  for (Modality mod : {Modality::kAudio, Modality::kVideo, Modality::kFused}) {
    auto model = models::make_model(mod, cfg, 21);
    // Move batchnorm statistics off their defaults first.
    {
      ad::NoGradGuard g;
      model->set_frozen(false);
      model->probabilities(random_input(cfg, 3, 5));
    }
    model->set_training(false);
    const auto in = random_input(cfg, 2, 6);
    Tensor before;
    {
      ad::NoGradGuard g;
      before = model->probabilities(in);
    }
    const auto path = dir.path() / "m.ckpt";
    save_checkpoint(*model, 7, 0.25, path);
    auto loaded = load_checkpoint(path, mod, cfg);
    loaded->set_training(false);
    ad::NoGradGuard g;
    const Tensor after = loaded->probabilities(in);
    EXPECT_LE(max_rel_diff(before, after), 1e-6) << models::modality_name(mod);
    const Checkpoint c = read_checkpoint(path);
    EXPECT_EQ(c.meta.epoch, 7u);
    EXPECT_EQ(c.meta.metric, 0.25f);
    EXPECT_EQ(c.state.entries.size(), model->state().size());
    EXPECT_EQ(c.state.parameter_count(), nn::state_dict(*model).parameter_count());
  }
}

TEST(Checkpoint, LayoutStartsWithMagicAndVersion) {
  TempDir dir;
  auto model = models::make_model(Modality::kAudio, ModelConfig::tiny(), 1);
  const auto path = dir.path() / "m.ckpt";
  save_checkpoint(*model, 0, 0.0, path);
  std::ifstream in(path, std::ios::binary);
  std::vector<unsigned char> b((std::istreambuf_iterator<char>(in)), {});
  ASSERT_GT(b.size(), 16u);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 8), "AVSRCKPT");
  EXPECT_EQ(b[8], 1);
  EXPECT_EQ(b[9] | b[10] | b[11], 0);
  const std::size_t entries = b[12] | (b[13] << 8);
  EXPECT_EQ(entries, model->state().size());
  // Last 32 bytes are the configuration digest.
  const Digest d = config_digest(model->config(), Modality::kAudio);
  EXPECT_TRUE(std::equal(d.begin(), d.end(), b.end() - 32));
}

TEST(Checkpoint, CorruptionIsReported) {
  TempDir dir;
  auto model = models::make_model(Modality::kAudio, ModelConfig::tiny(), 1);
  const auto path = dir.path() / "m.ckpt";
  save_checkpoint(*model, 0, 0.0, path);
  std::ifstream in(path, std::ios::binary);
  std::vector<char> b((std::istreambuf_iterator<char>(in)), {});
  in.close();
  auto write = [&](std::vector<char> bytes) {
    std::ofstream(path, std::ios::binary | std::ios::trunc).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  };
  auto bad_magic = b;
  bad_magic[0] = 'X';
  write(bad_magic);
  EXPECT_THROW(read_checkpoint(path), FormatError);
  auto bad_version = b;
  bad_version[8] = 2;
  write(bad_version);
  EXPECT_THROW(read_checkpoint(path), CheckpointError);
  write(std::vector<char>(b.begin(), b.end() - 40));
  EXPECT_THROW(read_checkpoint(path), FormatError);
  auto trailing = b;
  trailing.push_back(0);
  write(trailing);
  EXPECT_THROW(read_checkpoint(path), FormatError);
}

TEST(Checkpoint, DigestMismatchIsExplicit) {
  TempDir dir;
  const auto path = dir.path() / "m.ckpt";
  save_checkpoint(*models::make_model(Modality::kAudio, ModelConfig::tiny(10), 1), 0, 0.0, path);
  EXPECT_THROW(load_checkpoint(path, Modality::kAudio, ModelConfig::tiny(12)), CheckpointError);
  EXPECT_THROW(load_checkpoint(path, Modality::kVideo, ModelConfig::tiny(10)), CheckpointError);
  ModelConfig deeper = ModelConfig::tiny(10);
  deeper.audio_depth = 34;
  EXPECT_THROW(load_checkpoint(path, Modality::kAudio, deeper), CheckpointError);
  EXPECT_NO_THROW(load_checkpoint(path, Modality::kAudio, ModelConfig::tiny(10)));
}

TEST(Checkpoint, DigestIsStable) {
  const Digest a = config_digest(ModelConfig::tiny(), Modality::kAudio);
  EXPECT_EQ(a, config_digest(ModelConfig::tiny(), Modality::kAudio));
  EXPECT_NE(a, config_digest(ModelConfig::tiny(), Modality::kFused));
  EXPECT_EQ(digest_hex(a).size(), 64u);
}

// ---- metric log --------------------------------------------------------------

TEST(MetricLog, WriteParseRoundTrip) {
  MetricLog log;
  log.records = {{"stage1", 0, data::Split::kTrain, 2.302585092994046, 0.1, 1e-3},
                 {"stage1", 0, data::Split::kVal, 1.0 / 3.0, 0.125, 1e-3},
                 {"phaseB", 10, data::Split::kVal, 0.5, 1.0, 5e-4}};
  std::istringstream in(log.str());
  const MetricLog back = MetricLog::parse(in);
  EXPECT_EQ(back.records, log.records);
  std::istringstream bad("stage1 0 train 1.0\n");
  EXPECT_THROW(MetricLog::parse(bad), FormatError);
}

// ---- evaluation ------------------------------------------------------------------

// Reads the label encoded in the first audio sample and answers with a
// fixed distribution: one-hot on it, or uniform.
class OracleModel : public models::SequenceModel {
 public:
  OracleModel(const ModelConfig& cfg, bool uniform) : SequenceModel(cfg), uniform_(uniform) {}
  Modality modality() const override { return Modality::kAudio; }
  Tensor probabilities(const models::ModelInput& in) override {
    const auto& c = config();
    const std::size_t b = in.audio.dim(0), L = in.audio.dim(2);
    std::vector<double> p(b * c.timesteps * c.classes, uniform_ ? 1.0 / static_cast<double>(c.classes) : 0.0);
    if (!uniform_) {
      for (std::size_t i = 0; i < b; ++i) {
        const auto y = static_cast<std::size_t>(std::lround(in.audio[i * L] * 10.0));
        for (std::size_t t = 0; t < c.timesteps; ++t) p[(i * c.timesteps + t) * c.classes + y] = 1.0;
      }
    }
    return Tensor::from({b, c.timesteps, c.classes}, std::move(p));
  }
  Tensor loss(const models::ModelInput& in, std::span<const int>, Tensor* probs) override {
    if (probs) *probs = probabilities(in);
    return Tensor::scalar(0.0);
  }

 private:
  bool uniform_;
};

data::ClipSet labelled_set(const ModelConfig& cfg, std::size_t n) {
  data::ClipSet set;
  set.split = data::Split::kTest;
  set.extents = {cfg.timesteps, cfg.height, cfg.width, cfg.audio_length, cfg.classes, 16000};
  for (std::size_t i = 0; i < n; ++i) {
    data::Clip c;
    c.id = "c" + std::to_string(i);
    c.label = static_cast<int>(i % cfg.classes);
    c.frames.assign(set.extents.frame_values(), 0.0f);
    c.waveform.assign(cfg.audio_length, 0.0f);
    c.waveform[0] = static_cast<float>(c.label) / 10.0f;
    set.clips.push_back(std::move(c));
  }
  return set;
}

TEST(Evaluate, PerfectModelScoresOne) {
  const ModelConfig cfg = ModelConfig::tiny();
  OracleModel model(cfg, false);
  const auto r = evaluate(model, labelled_set(cfg, 200), 32);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.count, 200u);
  std::size_t total = 0;
  for (const auto& row : r.confusion)
    for (std::size_t n : row) total += n;
  EXPECT_EQ(total, 200u);
  for (double a : r.per_class) EXPECT_EQ(a, 1.0);
}

TEST(Evaluate, UniformModelScoresTheClassZeroShare) {
  const ModelConfig cfg = ModelConfig::tiny();
  OracleModel model(cfg, true);
  const auto r = evaluate(model, labelled_set(cfg, 200), 50);
  EXPECT_EQ(r.accuracy, 0.1);
  for (std::size_t c = 0; c < cfg.classes; ++c) EXPECT_EQ(r.confusion[c][0], 20u);
}

TEST(Evaluate, EmptySplitIsAnError) {
  const ModelConfig cfg = ModelConfig::tiny();
  OracleModel model(cfg, true);
  data::ClipSet empty;
  empty.extents.classes = cfg.classes;
  EXPECT_THROW(evaluate(model, empty), EmptyDatasetError);
}

// ---- protocols on a small configuration -------------------------------------------

struct SmallSetup {
  data::SyntheticSpec spec;
  ModelConfig cfg;
  TrainConfig tcfg;
  data::ClipSet train, val;

  SmallSetup() {
    spec.classes = 4;
    spec.height = spec.width = 12;
    spec.audio_length = 512;
    cfg = ModelConfig::tiny(4);
    cfg.height = cfg.width = 12;
    cfg.audio_length = 512;
    cfg.frontend_channels = 4;
    cfg.stage_widths = {4, 4, 8, 8};
    cfg.backend_width = 8;
    tcfg = TrainConfig::tiny();
    tcfg.batch_size = 8;
    tcfg.stage1_max_epochs = 2;
    tcfg.stage2_epochs = 2;
    tcfg.stage3_max_epochs = 2;
    tcfg.phase_a_epochs = 2;
    tcfg.phase_b_max_epochs = 2;
    train = make(data::Split::kTrain, 24);
    val = make(data::Split::kVal, 8);
  }

  data::ClipSet make(data::Split split, std::size_t n) const {
    data::ClipSet set;
    set.split = split;
    set.extents = spec.extents();
    for (std::size_t i = 0; i < n; ++i) set.clips.push_back(data::synthesize_clip(spec, split, i));
    return set;
  }
};

using Snapshot = std::vector<std::pair<std::string, std::vector<double>>>;

Snapshot snapshot(const nn::Module& m) {
  Snapshot s;
  for (const auto& e : m.state()) s.emplace_back(e.name, std::vector<double>(e.tensor.data().begin(), e.tensor.data().end()));
  return s;
}

// Entries whose values differ between two snapshots.
std::vector<std::string> changed(const Snapshot& a, const Snapshot& b) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].second != b[i].second) out.push_back(a[i].first);
  }
  return out;
}

bool starts_with_any(const std::string& s, std::initializer_list<const char*> prefixes) {
  for (const char* p : prefixes) {
    if (s.starts_with(p)) return true;
  }
  return false;
}

class StreamProtocol : public ::testing::TestWithParam<Modality> {};

TEST_P(StreamProtocol, StagesFreezeWhatTheyShould) {
  SmallSetup s;
  s.cfg.attention = {true, true, true};
  std::map<std::string, Snapshot> begin, end;
  TrainHooks hooks;
  hooks.on_stage_begin = [&](const std::string& st, models::SequenceModel& m) { begin[st] = snapshot(m); };
  hooks.on_stage_end = [&](const std::string& st, models::SequenceModel& m) { end[st] = snapshot(m); };
  const TrainResult r = train_stream(s.train, s.val, GetParam(), s.cfg, s.tcfg, hooks);

  // Stage 1 leaves the BGRU head alone.
  for (const auto& name : changed(begin["stage1"], end["stage1"])) {
    EXPECT_FALSE(starts_with_any(name, {"bgru.", "classifier."})) << name;
  }
  // Stage 2 touches only the BGRU head, bitwise.
  const auto s2 = changed(begin["stage2"], end["stage2"]);
  EXPECT_FALSE(s2.empty());
  for (const auto& name : s2) EXPECT_TRUE(starts_with_any(name, {"bgru.", "classifier."})) << name;
  // Stage 3 trains the encoder again but never the retired back-end.
  const auto s3 = changed(begin["stage3"], end["stage3"]);
  EXPECT_TRUE(std::any_of(s3.begin(), s3.end(), [](const std::string& n) { return n.starts_with("backbone."); }));
  for (const auto& name : s3) EXPECT_FALSE(name.starts_with("backend.")) << name;

  ASSERT_EQ(r.stages.size(), 3u);
  EXPECT_EQ(r.log.records.size(), 2 * r.total_epochs);
  EXPECT_LE(r.total_epochs, 6u);
  EXPECT_EQ(r.best.meta.digest, config_digest(s.cfg, GetParam()));
}

TEST_P(StreamProtocol, IdenticalSeedsGiveIdenticalLogs) {
  SmallSetup s;
  const TrainResult a = train_stream(s.train, s.val, GetParam(), s.cfg, s.tcfg);
  const TrainResult b = train_stream(s.train, s.val, GetParam(), s.cfg, s.tcfg);
  EXPECT_EQ(a.log.str(), b.log.str());
  ASSERT_EQ(a.best.state.entries.size(), b.best.state.entries.size());
  for (std::size_t i = 0; i < a.best.state.entries.size(); ++i) {
    const auto& x = a.best.state.entries[i].second;
    const auto& y = b.best.state.entries[i].second;
    EXPECT_TRUE(std::equal(x.data().begin(), x.data().end(), y.data().begin())) << a.best.state.entries[i].first;
  }
  s.tcfg.seed = 99;
  const TrainResult c = train_stream(s.train, s.val, GetParam(), s.cfg, s.tcfg);
  EXPECT_NE(a.log.str(), c.log.str());
}

INSTANTIATE_TEST_SUITE_P(Modalities, StreamProtocol, ::testing::Values(Modality::kAudio, Modality::kVideo),
                         [](const auto& info) { return std::string(models::modality_name(info.param)); });

TEST(StreamProtocol, NonFiniteInputIsATrainingError) {
  SmallSetup s;
  s.train.clips[5].waveform[3] = std::numeric_limits<float>::quiet_NaN();
  try {
    train_stream(s.train, s.val, Modality::kAudio, s.cfg, s.tcfg);
    FAIL() << "expected a training error";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos) << e.what();
  }
}

TEST(StreamProtocol, MismatchedDataIsAConfigError) {
  SmallSetup s;
  ModelConfig other = s.cfg;
  other.classes = 5;
  EXPECT_THROW(train_stream(s.train, s.val, Modality::kAudio, other, s.tcfg), ConfigError);
}

TEST(FusedProtocol, PhaseAFreezesStreamsAndPhaseBDecays) {
  SmallSetup s;
  s.cfg.attention = {true, true, true};
  TrainConfig quick = s.tcfg;
  quick.stage1_max_epochs = quick.stage2_epochs = quick.stage3_max_epochs = 1;
  const TrainResult audio = train_stream(s.train, s.val, Modality::kAudio, s.cfg, quick);
  const TrainResult video = train_stream(s.train, s.val, Modality::kVideo, s.cfg, quick);

  s.tcfg.phase_a_epochs = 1;
  s.tcfg.phase_b_max_epochs = 11;
  s.tcfg.patience = 100;
  std::map<std::string, Snapshot> begin, end;
  TrainHooks hooks;
  hooks.on_stage_begin = [&](const std::string& st, models::SequenceModel& m) { begin[st] = snapshot(m); };
  hooks.on_stage_end = [&](const std::string& st, models::SequenceModel& m) { end[st] = snapshot(m); };
  const TrainResult r = train_fused(s.train, s.val, audio.best, video.best, s.cfg, s.tcfg, hooks);

  const auto a = changed(begin["phaseA"], end["phaseA"]);
  EXPECT_FALSE(a.empty());
  for (const auto& name : a) EXPECT_FALSE(starts_with_any(name, {"video.", "audio."})) << name;
  const auto b = changed(begin["phaseB"], end["phaseB"]);
  EXPECT_TRUE(std::any_of(b.begin(), b.end(), [](const std::string& n) { return n.starts_with("video."); }));

  double lr0 = 0, lr10 = 0;
  for (const auto& rec : r.log.records) {
    if (rec.stage != "phaseB") continue;
    if (rec.epoch == 0) lr0 = rec.lr;
    if (rec.epoch == 10) lr10 = rec.lr;
  }
  EXPECT_GT(lr0, 0.0);
  EXPECT_EQ(lr10, 0.5 * lr0);
  EXPECT_EQ(r.log.records.size(), 2u * 12u);
}

TEST(FusedProtocol, IncompatibleStreamCheckpointIsRejected) {
  SmallSetup s;
  TrainConfig quick = s.tcfg;
  quick.stage1_max_epochs = quick.stage2_epochs = quick.stage3_max_epochs = 1;
  const TrainResult audio = train_stream(s.train, s.val, Modality::kAudio, s.cfg, quick);
  EXPECT_THROW(train_fused(s.train, s.val, audio.best, audio.best, s.cfg, s.tcfg), CheckpointError);
}

}  // namespace
}  // namespace avsr::train
