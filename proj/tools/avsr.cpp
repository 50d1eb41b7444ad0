// SPDX-License-Identifier: Apache-2.0
// Command-line entry point. Exit codes: 0 success, 1 usage or config
// error, 2 data error, 3 training or numerical error.
#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "avsr/core/error.hpp"
#include "avsr/experiment/commands.hpp"

namespace {

using namespace avsr;
using namespace avsr::experiment;

ExperimentConfig config_from(const std::string& path) {
  return path.empty() ? ExperimentConfig{} : load_config(path);
}

void apply_seed(ExperimentConfig& cfg, const std::optional<std::uint64_t>& seed) {
  if (!seed) return;
  cfg.seed = *seed;
  cfg.train.seed = *seed;
}

int run(int argc, char** argv) {
  CLI::App app{"Audio-visual word classification experiments"};
  app.require_subcommand(1);

  std::string config, out, stage, ckpt, data_path, split = "test", scope = "op", modality = "fused", fault;
  std::optional<std::uint64_t> seed;
  std::size_t coordinates = 64;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic corpus");
  gen->add_option("--config", config, "Config file (data.synthetic.* keys)");
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--seed", seed, "Overrides data.synthetic.seed");

  auto* train = app.add_subcommand("train", "Train one stream or the fused model");
  train->add_option("--config", config, "Config file")->required();
  train->add_option("--stage", stage, "audio, video or fused")->required();
  train->add_option("--seed", seed, "Overrides seed");
  train->add_option("--out", out, "Overrides output.dir");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
  eval->add_option("--config", config, "Config file the model was trained with");
  eval->add_option("--ckpt", ckpt, "Checkpoint")->required();
  eval->add_option("--data", data_path, "Dataset manifest or its directory")->required();
  eval->add_option("--split", split, "train, val or test");

  auto* ablate = app.add_subcommand("ablate", "Run the ablation grid and print the tables");
  ablate->add_option("--config", config, "Config file")->required();
  ablate->add_option("--out", out, "Overrides output.dir");
  ablate->add_option("--seed", seed, "Overrides seed");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  grad->add_option("--scope", scope, "op, layer or model");
  grad->add_option("--modality", modality, "Model for --scope model");
  grad->add_option("--coordinates", coordinates, "Coordinates sampled at model scope");
  grad->add_option("--seed", seed, "Probe seed");
  grad->add_option("--fault", fault, "Corrupt this parameter's gradient (negative control)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::kUsage);
  }

  if (gen->parsed()) {
    ExperimentConfig cfg = config_from(config);
    if (seed) cfg.synthetic.seed = *seed;
    cmd_gen_data(cfg, out, std::cout);
    return 0;
  }
  if (train->parsed()) {
    ExperimentConfig cfg = config_from(config);
    apply_seed(cfg, seed);
    if (!out.empty()) cfg.output = out;
    cmd_train(cfg, models::parse_modality(stage), std::cout);
    return 0;
  }
  if (eval->parsed()) {
    const ExperimentConfig cfg = config_from(config);
    cmd_eval(cfg, ckpt, data_path, data::parse_split(split), std::cout);
    return 0;
  }
  if (ablate->parsed()) {
    ExperimentConfig cfg = config_from(config);
    apply_seed(cfg, seed);
    if (!out.empty()) cfg.output = out;
    const AblationReport report = cmd_ablate(cfg, std::cout);
    return report.failed == 0 ? 0 : static_cast<int>(ErrorKind::kNumerical);
  }
  GradcheckRequest req;
  req.scope = parse_gradcheck_scope(scope);
  req.modality = models::parse_modality(modality);
  req.coordinates = coordinates;
  req.seed = seed.value_or(0);
  req.fault_param = fault;
  return cmd_gradcheck(req, std::cout) ? 0 : static_cast<int>(ErrorKind::kNumerical);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const avsr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return static_cast<int>(avsr::ErrorKind::kNumerical);
  }
}
