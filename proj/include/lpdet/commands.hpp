#pragma once

#include <string>
#include <vector>

#include "lpdet/config.hpp"
#include "lpdet/metrics.hpp"
#include "lpdet/pipeline.hpp"

namespace lpdet::commands {

// Every command writes the resolved config into its output directory, seeds
// all randomness from the config, exits 0 on success, and reports failures
// as a single machine-parsable line on stderr.

int cmd_synth(const RunConfig& cfg, const std::string& out_dir);

// Trains on the train split of `data_dir`; writes checkpoint.lpwt,
// loss_log.jsonl, and config.resolved into `run_dir`.
int cmd_train(const RunConfig& cfg, const std::string& data_dir, const std::string& run_dir);

// Evaluates a checkpoint on the test split; prints the report table and
// writes report.json + detections.jsonl into `out_dir` (when non-empty).
int cmd_eval(const RunConfig& cfg, const std::string& checkpoint, const std::string& data_dir,
             const std::string& out_dir);

int cmd_infer(const RunConfig& cfg, const std::string& checkpoint,
              const std::vector<std::string>& images, const std::string& out_path);

// One row per expansion ratio in {1,2,3,4,5,inf}: plate AP at both IOU
// thresholds and C_recall, evaluated with the same checkpoint.
int cmd_sweep_ratio(const RunConfig& cfg, const std::string& checkpoint, const std::string& data_dir,
                    const std::string& out_path);

int cmd_gradcheck(const RunConfig& cfg, int seeds);

// Shared by cmd_eval and the sweep: runs inference over the test split at
// the pipeline's current settings and assembles the report.
EvalReport evaluate_split(Pipeline& pipe, const std::string& data_dir,
                          std::vector<Detection>* all_detections = nullptr);

}  // namespace lpdet::commands
