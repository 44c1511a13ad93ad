// Command-level entry points behind the CLI: each runs a deterministic
// experiment and writes versioned CSV (plus PPM images where relevant).
// They return process exit codes so the CLI stays a thin argument parser,
// and tests can drive the exact code path the binary uses.

#pragma once

#include "gazefix/runner.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gazefix {

struct DistanceEvalRow {
  double distance = 0.0;
  bool fixation = true;
  double mean_abs_error = 0.0;  // m, over the evaluation window
  double std_error = 0.0;       // m, std of signed error
  int n_samples = 0;
};

struct DistanceEvalOptions {
  std::vector<double> distances = {0.066, 0.15, 0.33, 0.66, 1.5, 2.0, 3.3, 6.6};
  std::uint64_t seed = 7;
  double sigma_v = 1e-3;  // m/s
  double sigma_w = 1e-3;  // rad/s
  std::string mode = "both";  // fixation | translation | both
  bool oracle = false;        // exact perception instead of rendered images
  double settle = 6.0;        // s before the evaluation window
  int window = 225;           // samples at the perception rate
  std::string out_dir;        // empty: no CSV, results only
};

// Scene used per grid distance: a single target card dead ahead, cyclic
// lateral sweep, approach disabled.
ScenarioConfig distance_eval_scenario(double distance, std::uint64_t seed,
                                      double sigma_v, double sigma_w);

std::vector<DistanceEvalRow> distance_eval(const DistanceEvalOptions& opts);

int cmd_distance_eval(const DistanceEvalOptions& opts);

struct ScenarioCmdOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> sigma_v, sigma_w;
  bool fixation = true;
  bool frames = false;
  double settle = 2.0;  // s, classification accuracy counted after this
};

int cmd_scenario(const ScenarioCmdOptions& opts);

struct PickCmdOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  double min_clearance = 0.05;  // m
  double max_lost_dwell = 5.0;  // s
};

int cmd_pick_demo(const PickCmdOptions& opts);

int cmd_flow_viz(const std::string& config_path, double t,
                 const std::string& out_path);

void write_records_csv(const std::string& path,
                       const std::vector<RunRecord>& records);
void write_distance_eval_csv(const std::string& path,
                             const std::vector<DistanceEvalRow>& rows);

}  // namespace gazefix
