#include "gazefix/commands.hpp"

#include "gazefix/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <tuple>

namespace gazefix {
namespace {

void append(std::string& s, const char* fmt, ...) {
  char buf[256];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  s += buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  std::fwrite(text.data(), 1, text.size(), f);
  std::fclose(f);
}

RunResult run_distance_point(double distance, bool fixation,
                             const DistanceEvalOptions& opts) {
  ScenarioConfig cfg =
      distance_eval_scenario(distance, opts.seed, opts.sigma_v, opts.sigma_w);
  cfg.duration = opts.settle + opts.window / cfg.perception_rate + 0.2;
  RunOptions run;
  run.fixation = fixation;
  run.approach_enabled = false;
  run.lateral_dist_term = false;
  run.obstacle_avoidance = false;
  run.classify_grid = false;
  run.oracle_perception = opts.oracle;
  return run_scenario(cfg, run);
}

DistanceEvalRow summarize(double distance, bool fixation, const RunResult& res,
                          int window) {
  DistanceEvalRow row;
  row.distance = distance;
  row.fixation = fixation;
  const int n = static_cast<int>(res.records.size());
  const int start = std::max(0, n - window);
  double sum_abs = 0.0, sum = 0.0, sum_sq = 0.0;
  int count = 0;
  for (int i = start; i < n; ++i) {
    const double e = res.records[i].z_f_est - res.records[i].z_f_true;
    sum_abs += std::abs(e);
    sum += e;
    sum_sq += e * e;
    ++count;
  }
  row.n_samples = count;
  if (count > 0) {
    row.mean_abs_error = sum_abs / count;
    const double mean = sum / count;
    row.std_error = std::sqrt(std::max(0.0, sum_sq / count - mean * mean));
  }
  return row;
}

}  // namespace

ScenarioConfig distance_eval_scenario(double distance, std::uint64_t seed,
                                      double sigma_v, double sigma_w) {
  ScenarioConfig cfg;
  cfg.seed = seed;
  cfg.sigma_v = sigma_v;
  cfg.sigma_w = sigma_w;
  cfg.camera_position = {0.0, 0.0, 0.0};
  cfg.camera_look_at = {0.0, 0.0, distance};
  cfg.gains.lambda_dist.setZero();
  cfg.gains.lambda_cycle = {0.03, 0.03};
  cfg.target_id = "target";
  ObjectSpec card;
  card.id = "target";
  card.type = "card";
  card.center = {0.0, 0.0, distance};
  card.size = 0.25 * 2.0 * distance * cfg.intrinsics.tan_half_fov();
  card.color = {200, 40, 40};
  cfg.objects.push_back(card);
  return cfg;
}

std::vector<DistanceEvalRow> distance_eval(const DistanceEvalOptions& opts) {
  struct Job {
    double distance;
    bool fixation;
  };
  std::vector<Job> jobs;
  for (double d : opts.distances) {
    if (opts.mode == "both" || opts.mode == "fixation") jobs.push_back({d, true});
    if (opts.mode == "both" || opts.mode == "translation") jobs.push_back({d, false});
  }
  std::vector<DistanceEvalRow> rows(jobs.size());
  // Runs are independent; the grid is the natural parallel axis.
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < static_cast<int>(jobs.size()); ++i) {
    const RunResult res =
        run_distance_point(jobs[i].distance, jobs[i].fixation, opts);
    rows[i] = summarize(jobs[i].distance, jobs[i].fixation, res, opts.window);
  }
  return rows;
}

void write_distance_eval_csv(const std::string& path,
                             const std::vector<DistanceEvalRow>& rows) {
  std::string out = "# schema_version=1\n";
  out += "distance,mode,mean_abs_error,std_error,n_samples\n";
  for (const auto& r : rows) {
    append(out, "%.9g,%s,%.9g,%.9g,%d\n", r.distance,
           r.fixation ? "fixation" : "translation", r.mean_abs_error,
           r.std_error, r.n_samples);
  }
  write_text(path, out);
}

void write_records_csv(const std::string& path,
                       const std::vector<RunRecord>& records) {
  std::string out = "# schema_version=1\n";
  out += "t,z_f_true,z_f_est,sigma_z,feature_error,obs_mass,clearance,phase,consistent\n";
  for (const auto& r : records) {
    append(out, "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%s,%d\n", r.t, r.z_f_true,
           r.z_f_est, r.sigma_z, r.feature_error, r.obs_mass, r.clearance,
           phase_name(r.phase), r.consistent ? 1 : 0);
  }
  write_text(path, out);
}

int cmd_distance_eval(const DistanceEvalOptions& opts) {
  const auto rows = distance_eval(opts);
  if (!opts.out_dir.empty()) {
    write_distance_eval_csv(opts.out_dir + "/distance_eval.csv", rows);
  }
  std::printf("distance  mode         mean|err| [m]  std [m]\n");
  for (const auto& r : rows) {
    std::printf("%8.3f  %-11s  %13.6f  %7.4f\n", r.distance,
                r.fixation ? "fixation" : "translation", r.mean_abs_error,
                r.std_error);
  }
  return 0;
}

int cmd_scenario(const ScenarioCmdOptions& opts) {
  ScenarioConfig cfg = load_scenario(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.sigma_v) cfg.sigma_v = *opts.sigma_v;
  if (opts.sigma_w) cfg.sigma_w = *opts.sigma_w;
  RunOptions run;
  run.fixation = opts.fixation;
  if (opts.frames && !opts.out_dir.empty()) run.frames_dir = opts.out_dir;
  const RunResult res = run_scenario(cfg, run);

  if (!opts.out_dir.empty()) {
    write_records_csv(opts.out_dir + "/records.csv", res.records);
    // Aggregated truth-vs-measured counts per object, after settling.
    const World world = make_scene(cfg);
    std::map<std::tuple<int, bool, int, int>, long> counts;
    for (const auto& c : res.classified) {
      if (c.t < opts.settle) continue;
      ++counts[{c.object_index, c.is_virtual, static_cast<int>(c.truth),
                static_cast<int>(c.measured)}];
    }
    std::string out = "# schema_version=1\n";
    out += "object_id,is_virtual,truth,measured,count\n";
    const char* names[] = {"Front", "Behind", "NearSurface"};
    for (const auto& [key, count] : counts) {
      const auto& [obj, virt, truth, measured] = key;
      append(out, "%s,%d,%s,%s,%ld\n", world.objects[obj].id.c_str(), virt ? 1 : 0,
             names[truth], names[measured], count);
    }
    write_text(opts.out_dir + "/classification.csv", out);
  }

  long correct = 0, classified = 0;
  for (const auto& c : res.classified) {
    if (c.t < opts.settle || c.measured == DepthClass::NearSurface) continue;
    ++classified;
    if (c.measured == c.truth) ++correct;
  }
  std::printf("records: %zu  final phase: %s  classification accuracy: %.1f%% (%ld samples)\n",
              res.records.size(), phase_name(res.final_phase),
              classified > 0 ? 100.0 * correct / classified : 0.0, classified);
  if (res.diverged || !res.failure.empty()) {
    std::printf("FAILED: %s\n", res.failure.c_str());
    return 1;
  }
  return 0;
}

int cmd_pick_demo(const PickCmdOptions& opts) {
  ScenarioConfig cfg = load_scenario(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  RunOptions run;
  const RunResult res = run_scenario(cfg, run);
  if (!opts.out_dir.empty()) {
    write_records_csv(opts.out_dir + "/records.csv", res.records);
  }

  std::string failure;
  if (res.diverged) {
    failure = "diverged";
  } else if (res.min_clearance < opts.min_clearance) {
    failure = "collision risk: clearance " + std::to_string(res.min_clearance);
  } else if (res.max_lost_dwell > opts.max_lost_dwell) {
    failure = "lost target for " + std::to_string(res.max_lost_dwell) + " s";
  } else if (!res.grasp_executed) {
    failure = "timeout: grasp never triggered";
  } else if (std::abs(res.trigger_z_true - cfg.gains.z_desired) > 0.010) {
    failure = "grasp triggered at wrong distance";
  }
  std::printf("pick-demo: %s\n", failure.empty() ? "SUCCESS" : failure.c_str());
  std::printf("  grasp: %s  trigger |Z-Zd|: %.4f m (est %.4f)  clearance: %.3f m  lost dwell: %.2f s\n",
              res.grasp_executed ? "yes" : "no",
              res.grasp_executed
                  ? std::abs(res.trigger_z_true - cfg.gains.z_desired)
                  : -1.0,
              res.grasp_executed ? std::abs(res.trigger_z_est - cfg.gains.z_desired)
                                 : -1.0,
              res.min_clearance, res.max_lost_dwell);
  return failure.empty() ? 0 : 1;
}

int cmd_flow_viz(const std::string& config_path, double t,
                 const std::string& out_path) {
  ScenarioConfig cfg = load_scenario(config_path);
  if (t > cfg.duration) {
    std::printf("warning: t=%.3f beyond duration %.3f, clamping\n", t, cfg.duration);
    t = cfg.duration;
  }
  if (t < 0.0) {
    std::printf("warning: negative t, clamping to first tick\n");
    t = 0.0;
  }
  cfg.duration = std::min(cfg.duration, t + 0.5);
  RunOptions run;
  run.flow_viz_t = t;
  run.flow_viz_path = out_path;
  const RunResult res = run_scenario(cfg, run);
  return res.diverged ? 1 : 0;
}

}  // namespace gazefix
