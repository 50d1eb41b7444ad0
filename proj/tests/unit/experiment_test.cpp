// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "avsr/core/error.hpp"
#include "avsr/experiment/commands.hpp"
#include "avsr/experiment/config.hpp"
#include "avsr/experiment/results.hpp"

namespace avsr::experiment {
namespace {

namespace fs = std::filesystem;
using models::Modality;

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

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// ---- config ------------------------------------------------------------------

TEST(Config, DefaultsAreTheTinyProfile) {
  const ExperimentConfig c = parse_config("");
  EXPECT_EQ(c.model, models::ModelConfig::tiny());
  EXPECT_EQ(c.synthetic.train, 2000u);
  EXPECT_EQ(c.axes.modalities.size(), 3u);
}

TEST(Config, ParsesDottedKeysCommentsAndBlankLines) {
  const ExperimentConfig c = parse_config(
      "# comment line\n"
      "\n"
      "model.depth.video = 34   # trailing comment\n"
      "model.attention.audio=off\n"
      "model.stage_widths = 4, 4, 8, 8\n"
      "train.lr.base = 5e-4\n"
      "train.schedule.stream = step\n"
      "train.augment = on\n"
      "data.synthetic.distractors = true\n"
      "data.manifest = corpus/manifest.txt\n"
      "ablate.modality = fused, audio\n"
      "ablate.depth = 18\n"
      "seed = 7\n",
      "/base");
  EXPECT_EQ(c.model.video_depth, 34);
  EXPECT_EQ(c.model.audio_depth, 18);
  EXPECT_FALSE(c.model.attention.audio);
  EXPECT_TRUE(c.model.attention.video);
  EXPECT_EQ(c.model.stage_widths, (std::vector<std::size_t>{4, 4, 8, 8}));
  EXPECT_EQ(c.train.rates.base, 5e-4);
  EXPECT_EQ(c.train.stream_schedule, train::ScheduleKind::kStepDecay);
  EXPECT_TRUE(c.train.augment.enabled);
  EXPECT_TRUE(c.synthetic.distractors);
  EXPECT_EQ(c.manifest, fs::path("/base/corpus/manifest.txt"));
  EXPECT_EQ(c.axes.modalities, (std::vector<Modality>{Modality::kFused, Modality::kAudio}));
  EXPECT_EQ(c.axes.depth, std::vector<int>{18});
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.train.seed, 7u);
}

TEST(Config, ProfileAppliesBeforeOtherKeys) {
  const ExperimentConfig c = parse_config("train.batch_size = 8\nmodel.profile = paper\n");
  EXPECT_EQ(c.model.profile, models::Profile::kPaper);
  EXPECT_EQ(c.model.gru_hidden, models::ModelConfig::paper().gru_hidden);
  EXPECT_EQ(c.train.batch_size, 8u);
  EXPECT_EQ(c.train.rates.base, 1e-4);
}

TEST(Config, UnknownKeyIsAHardError) {
  try {
    parse_config("seed = 1\nmodel.dpeth.video = 34\n", {}, "exp.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("exp.cfg:2"), std::string::npos) << what;
    EXPECT_NE(what.find("model.dpeth.video"), std::string::npos) << what;
  }
}

TEST(Config, MalformedInputIsRejected) {
  for (const char* text : {"seed\n", "= 3\n", "seed = -1\n", "seed = 1x\n", "model.depth.audio = 50\n",
                           "train.lr.base = nan\n", "train.augment = maybe\n", "seed = 1\nseed = 2\n",
                           "ablate.attention = on, on\n", "model.profile = huge\n", "train.schedule.fused = cosine\n"}) {
    EXPECT_THROW(parse_config(text), ConfigError) << text;
  }
}

TEST(Config, EveryKeyIsAccepted) {
  // A value that parses for each key family.
  auto sample = [](const std::string& key) -> std::string {
    if (key.starts_with("ablate.modality")) return "audio";
    if (key.starts_with("ablate.attention") || key.starts_with("ablate.noise") || key.find("attention.") != std::string::npos ||
        key == "train.augment" || key == "data.synthetic.distractors")
      return "on";
    if (key.find("depth") != std::string::npos) return "18";
    if (key == "model.profile") return "tiny";
    if (key.find("schedule") != std::string::npos) return "constant";
    if (key == "model.stage_widths") return "8,16,32,64";
    if (key == "data.manifest" || key == "output.dir" || key.starts_with("checkpoint.")) return "x";
    return "1";
  };
  std::string text;
  for (const auto& k : config_keys()) text += k + " = " + sample(k) + "\n";
  EXPECT_NO_THROW(parse_config(text));
}

TEST(Config, LoadMissingFileIsAnIoError) {
  EXPECT_THROW(load_config("/nonexistent/exp.cfg"), IoError);
}

// ---- result tables ---------------------------------------------------------------

ResultTable sample_table() {
  ResultTable t;
  t.id = "attention";
  t.title = "Attention ablation";
  t.rows = {"Audio", "Visual"};
  t.columns = {"without attention", "with attention"};
  t.add({"Audio", "without attention", 0.955, 0.9594});
  t.add({"Audio", "with attention", 1.0 / 3.0, 0.9702});
  t.add({"Visual", "without attention", std::nullopt, 0.8290});
  t.add({"Visual", "with attention", 0.1 + 0.2, std::nullopt});
  return t;
}

TEST(ResultTable, MachineLinesRoundTripExactly) {
  ResultTable other;
  other.id = "depth";
  other.title = "Depth";
  other.rows = {"AudioVisual"};
  other.columns = {"ResNet-18"};
  other.add({"AudioVisual", "ResNet-18", 0.5, std::nullopt});
  const std::vector<ResultTable> tables{sample_table(), other};
  std::stringstream ss;
  write_lines(ss, tables);
  EXPECT_EQ(parse_lines(ss), tables);
}

TEST(ResultTable, DuplicateOrUnknownCellsAreRejected) {
  ResultTable t = sample_table();
  EXPECT_THROW(t.add({"Audio", "with attention", 0.5, std::nullopt}), ConfigError);
  EXPECT_THROW(t.add({"Speech", "with attention", 0.5, std::nullopt}), ConfigError);
  std::stringstream dup("table\tt\tT\tA\tx\ncell\tt\tA\tx\t0.5\t-\ncell\tt\tA\tx\t0.6\t-\n");
  EXPECT_THROW(parse_lines(dup), FormatError);
  std::stringstream junk("row\tt\n");
  EXPECT_THROW(parse_lines(junk), FormatError);
}

TEST(ResultTable, TextIsAligned) {
  const std::string text = sample_table().text();
  std::istringstream in(text);
  std::string title, header, audio, visual;
  std::getline(in, title);
  std::getline(in, header);
  std::getline(in, audio);
  std::getline(in, visual);
  EXPECT_EQ(title, "Attention ablation");
  EXPECT_EQ(header.size(), audio.size());
  EXPECT_EQ(audio.size(), visual.size());
  EXPECT_NE(header.find("reference (published)"), std::string::npos);
  EXPECT_NE(audio.find("0.9550"), std::string::npos);
  EXPECT_NE(visual.find("failed"), std::string::npos);
  EXPECT_NE(visual.find("0.8290"), std::string::npos);
}

// ---- commands on a small corpus --------------------------------------------------------

// Small model and corpus so every command finishes in seconds.
std::string small_config(const fs::path& out) {
  return "output.dir = " + out.string() +
         "\n"
         "data.synthetic.classes = 4\n"
         "data.synthetic.train = 24\n"
         "data.synthetic.val = 8\n"
         "data.synthetic.test = 12\n"
         "data.synthetic.height = 12\n"
         "data.synthetic.width = 12\n"
         "data.synthetic.audio_length = 512\n"
         "model.frontend_channels = 4\n"
         "model.stage_widths = 4, 4, 8, 8\n"
         "model.backend_width = 8\n"
         "train.batch_size = 8\n"
         "train.epochs.stage1 = 1\n"
         "train.epochs.stage2 = 1\n"
         "train.epochs.stage3 = 1\n"
         "train.epochs.phase_a = 1\n"
         "train.epochs.phase_b = 1\n";
}

TEST(GenData, DefaultSpecCountsAndDeterminism) {
  TempDir dir;
  ExperimentConfig cfg;
  cfg.synthetic.height = cfg.synthetic.width = 8;  // counts do not depend on size
  cfg.synthetic.audio_length = 64;
  std::ostringstream log;
  const fs::path manifest = cmd_gen_data(cfg, dir.path() / "a", log);
  EXPECT_NE(log.str().find("classes 10, train 2000, val 200, test 200"), std::string::npos) << log.str();
  const auto m = data::load_manifest(manifest);
  EXPECT_EQ(m.class_names.size(), 10u);
  cmd_gen_data(cfg, dir.path() / "b", log);
  EXPECT_EQ(slurp(dir.path() / "a" / "manifest.txt"), slurp(dir.path() / "b" / "manifest.txt"));
  const auto& r = m.records[1234];
  EXPECT_EQ(slurp(dir.path() / "a" / (r.stem + ".frames")), slurp(dir.path() / "b" / (r.stem + ".frames")));
  EXPECT_EQ(slurp(dir.path() / "a" / (r.stem + ".wav16k")), slurp(dir.path() / "b" / (r.stem + ".wav16k")));
}

TEST(GenData, InvalidSpecIsAConfigError) {
  TempDir dir;
  ExperimentConfig cfg;
  cfg.synthetic.consistency = 1.5;
  std::ostringstream log;
  EXPECT_THROW(cmd_gen_data(cfg, dir.path(), log), ConfigError);
}

TEST(Train, FusedWithoutCheckpointsNamesTheMissingKeys) {
  TempDir dir;
  const ExperimentConfig cfg = parse_config(small_config(dir.path()));
  std::ostringstream log;
  try {
    cmd_train(cfg, Modality::kFused, log);
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("checkpoint.audio and checkpoint.video"), std::string::npos) << e.what();
  }
  ExperimentConfig half = cfg;
  half.audio_checkpoint = dir.path() / "a.ckpt";
  try {
    cmd_train(half, Modality::kFused, log);
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("checkpoint.video"), std::string::npos);
    EXPECT_EQ(std::string(e.what()).find("checkpoint.audio"), std::string::npos);
  }
}

TEST(Train, StreamsThenFusedThenEval) {
  TempDir dir;
  ExperimentConfig cfg = parse_config(small_config(dir.path()));
  std::ostringstream log;
  const TrainOutputs audio = cmd_train(cfg, Modality::kAudio, log);
  const TrainOutputs video = cmd_train(cfg, Modality::kVideo, log);
  // One train and one val line per epoch.
  std::istringstream metrics(slurp(audio.metrics));
  const auto parsed = train::MetricLog::parse(metrics);
  EXPECT_EQ(parsed.records.size(), 2 * audio.epochs);
  EXPECT_EQ(audio.epochs, 3u);

  const std::string first_log = slurp(audio.metrics);
  cmd_train(cfg, Modality::kAudio, log);
  EXPECT_EQ(slurp(audio.metrics), first_log);

  cfg.audio_checkpoint = audio.checkpoint;
  cfg.video_checkpoint = video.checkpoint;
  const TrainOutputs fused = cmd_train(cfg, Modality::kFused, log);
  EXPECT_EQ(fused.epochs, 2u);

  const fs::path manifest = dir.path() / "data" / "manifest.txt";
  std::ostringstream a, b;
  const auto r = cmd_eval(cfg, fused.checkpoint, manifest, data::Split::kTest, a);
  cmd_eval(cfg, fused.checkpoint, manifest, data::Split::kTest, b);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str().find("fused model, test split, 12 clips"), std::string::npos) << a.str();
  std::size_t total = 0;
  for (const auto& row : r.confusion)
    for (std::size_t n : row) total += n;
  EXPECT_EQ(total, 12u);
  EXPECT_EQ(checkpoint_modality(train::read_checkpoint(video.checkpoint)), Modality::kVideo);
  EXPECT_EQ(checkpoint_modality(train::read_checkpoint(audio.checkpoint)), Modality::kAudio);

  // Same checkpoint against a corpus with more classes.
  ExperimentConfig wider = cfg;
  wider.synthetic.classes = 5;
  std::ostringstream quiet;
  const fs::path other = cmd_gen_data(wider, dir.path() / "wider", quiet);
  EXPECT_THROW(cmd_eval(cfg, fused.checkpoint, other, data::Split::kTest, quiet), CheckpointError);
}

TEST(Ablate, AttentionGridTrainsSixRunsAndCaches) {
  TempDir dir;
  const ExperimentConfig cfg =
      parse_config(small_config(dir.path()) + "ablate.attention = off, on\nablate.noise = off\nablate.depth = 18\n");
  std::ostringstream log;
  const AblationReport report = cmd_ablate(cfg, log);
  EXPECT_EQ(report.trained, 6u) << log.str();
  EXPECT_EQ(report.failed, 0u);
  ASSERT_EQ(report.tables.size(), 4u);
  for (const auto& t : report.tables) {
    EXPECT_TRUE(t.complete()) << t.id;
    EXPECT_EQ(t.rows, (std::vector<std::string>{"Audio", "Visual", "AudioVisual"}));
  }
  const ResultTable& attention = report.tables[0];
  EXPECT_EQ(attention.columns, (std::vector<std::string>{"without attention", "with attention"}));
  EXPECT_EQ(*attention.find("AudioVisual", "with attention")->reference, 0.9823);
  // The shared baseline cell is reused by the other tables.
  EXPECT_EQ(attention.find("Audio", "with attention")->accuracy, report.tables[1].find("Audio", "without noise")->accuracy);

  std::ifstream results(dir.path() / "results.tsv");
  EXPECT_EQ(parse_lines(results), report.tables);

  std::ostringstream again;
  const AblationReport cached = cmd_ablate(cfg, again);
  EXPECT_EQ(cached.trained, 0u);
  EXPECT_EQ(cached.tables, report.tables);
}

// ---- gradient checks ----------------------------------------------------------------

TEST(Gradcheck, OpScopePassesAndFaultIsNamed) {
  std::ostringstream out;
  EXPECT_TRUE(cmd_gradcheck(GradcheckRequest{}, out)) << out.str();
  EXPECT_NE(out.str().find(" 0 failed"), std::string::npos);
  GradcheckRequest bad;
  bad.scope = GradcheckScope::kLayer;
  bad.fault_param = "raw";
  std::ostringstream fail;
  EXPECT_FALSE(cmd_gradcheck(bad, fail));
  EXPECT_NE(fail.str().find("failing: raw"), std::string::npos) << fail.str();
  EXPECT_THROW(parse_gradcheck_scope("everything"), UsageError);
}

// ---- exit codes of the binary ----------------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(AVSR_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodesFollowTheErrorFamily) {
  TempDir dir;
  const fs::path log = dir.path() / "out.txt";
  const fs::path cfg = dir.path() / "exp.cfg";
  spit(cfg, small_config(dir.path() / "run"));
  EXPECT_EQ(run_cli("--help", log), 0);
  EXPECT_EQ(run_cli("", log), 1);
  EXPECT_EQ(run_cli("frobnicate", log), 1);
  EXPECT_EQ(run_cli("train --config " + cfg.string() + " --stage fused", log), 1);
  EXPECT_NE(slurp(log).find("checkpoint.audio"), std::string::npos);
  EXPECT_EQ(run_cli("train --config " + cfg.string() + " --stage speech", log), 1);

  const fs::path bad_cfg = dir.path() / "bad.cfg";
  spit(bad_cfg, "model.widht = 3\n");
  EXPECT_EQ(run_cli("train --config " + bad_cfg.string() + " --stage audio", log), 1);
  EXPECT_EQ(run_cli("train --config " + (dir.path() / "none.cfg").string() + " --stage audio", log), 2);

  EXPECT_EQ(run_cli("gen-data --config " + cfg.string() + " --out " + (dir.path() / "data").string(), log), 0);
  EXPECT_NE(slurp(log).find("classes 4, train 24, val 8, test 12"), std::string::npos) << slurp(log);
  const fs::path ckpt = dir.path() / "junk.ckpt";
  spit(ckpt, "not a checkpoint");
  EXPECT_EQ(run_cli("eval --ckpt " + ckpt.string() + " --data " + (dir.path() / "data").string(), log), 2);
  EXPECT_EQ(run_cli("eval --ckpt " + ckpt.string() + " --data " + (dir.path() / "data").string() + " --split dev", log), 1);

  // Diverging training: the learning rate overflows the weights.
  const fs::path wild = dir.path() / "wild.cfg";
  spit(wild, small_config(dir.path() / "wild") + "train.lr.base = 1e300\ntrain.lr.attention = 1e300\n");
  EXPECT_EQ(run_cli("train --config " + wild.string() + " --stage audio", log), 3) << slurp(log);

  EXPECT_EQ(run_cli("gradcheck --scope op", log), 0);
  EXPECT_EQ(run_cli("gradcheck --scope layer --fault raw", log), 3);
  EXPECT_EQ(run_cli("gradcheck --scope galaxy", log), 1);
}

}  // namespace
}  // namespace avsr::experiment
