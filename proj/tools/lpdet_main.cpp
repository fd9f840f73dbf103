#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lpdet/commands.hpp"
#include "lpdet/config.hpp"

using namespace lpdet;

namespace {

RunConfig resolve_config(const std::string& config_path, const std::vector<std::string>& sets) {
  if (config_path.empty()) return config_from_overrides(sets);
  return load_config(config_path, sets);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coarse-to-fine license plate detection on synthetic scenes"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  app.add_option("-c,--config", config_path, "key=value config file");
  app.add_option("--set", sets, "override a config key (key=value, repeatable)");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset split");
  std::string synth_out;
  synth->add_option("-o,--out", synth_out, "output dataset directory")->required();

  auto* train = app.add_subcommand("train", "train on a dataset's train split");
  std::string train_data, train_run;
  train->add_option("-d,--data", train_data, "dataset directory")->required();
  train->add_option("-o,--out", train_run, "run directory for checkpoint and loss log")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  std::string eval_ckpt, eval_data, eval_out;
  eval->add_option("-w,--checkpoint", eval_ckpt, "weights file")->required();
  eval->add_option("-d,--data", eval_data, "dataset directory")->required();
  eval->add_option("-o,--out", eval_out, "directory for report.json and detections.jsonl");

  auto* infer = app.add_subcommand("infer", "run detection on images");
  std::string infer_ckpt, infer_out;
  std::vector<std::string> infer_images;
  infer->add_option("-w,--checkpoint", infer_ckpt, "weights file")->required();
  infer->add_option("-o,--out", infer_out, "output detections.jsonl")->required();
  infer->add_option("images", infer_images, "PPM images")->required();

  auto* sweep = app.add_subcommand("sweep-ratio", "evaluate across expansion ratios 1,2,3,4,5,inf");
  std::string sweep_ckpt, sweep_data, sweep_out;
  sweep->add_option("-w,--checkpoint", sweep_ckpt, "weights file")->required();
  sweep->add_option("-d,--data", sweep_data, "dataset directory")->required();
  sweep->add_option("-o,--out", sweep_out, "output json table");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference audit of ops and losses");
  int gradcheck_seeds = 50;
  gradcheck->add_option("--seeds", gradcheck_seeds, "random instances per check");

  auto* config_cmd = app.add_subcommand("config", "print config keys or the resolved config");
  bool config_keys = false, config_dump = false;
  config_cmd->add_flag("--keys", config_keys, "list keys with defaults and docs");
  config_cmd->add_flag("--dump", config_dump, "print the resolved config");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = resolve_config(config_path, sets);
    if (synth->parsed()) return commands::cmd_synth(cfg, synth_out);
    if (train->parsed()) return commands::cmd_train(cfg, train_data, train_run);
    if (eval->parsed()) return commands::cmd_eval(cfg, eval_ckpt, eval_data, eval_out);
    if (infer->parsed()) return commands::cmd_infer(cfg, infer_ckpt, infer_images, infer_out);
    if (sweep->parsed()) return commands::cmd_sweep_ratio(cfg, sweep_ckpt, sweep_data, sweep_out);
    if (gradcheck->parsed()) return commands::cmd_gradcheck(cfg, gradcheck_seeds);
    if (config_cmd->parsed()) {
      if (config_keys) std::cout << describe_config_keys();
      if (config_dump || !config_keys) std::cout << dump_config(cfg);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: cli: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
