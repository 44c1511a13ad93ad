// Closed-loop scenario execution: control at the fast rate, perception
// (render, centroid, edge flow, EKF, obstacle field) at the slow rate, with
// the Fixate -> Approach -> Grasp -> Done phase machine and Lost recovery.
// Perception can run through the rendered-image pipeline or through the
// exact oracle (true projections and analytic flow), which is how the
// noiseless-observability checks isolate estimator behavior from pixel
// effects.

#pragma once

#include "gazefix/scenario.hpp"

#include <limits>
#include <string>
#include <vector>

namespace gazefix {

enum class Phase { Fixate, Approach, Grasp, Done, Lost };

const char* phase_name(Phase p);

struct RunRecord {
  double t = 0.0;
  double z_f_true = 0.0;
  double z_f_est = 0.0;
  double sigma_z = 0.0;
  double feature_error = -1.0;  // |centroid|, -1 when the target is not seen
  double obs_mass = 0.0;
  double clearance = 0.0;
  Phase phase = Phase::Fixate;
  bool consistent = true;
};

struct ClassifiedSample {
  double t = 0.0;
  int object_index = -1;
  bool is_virtual = false;
  DepthClass truth = DepthClass::NearSurface;
  DepthClass measured = DepthClass::NearSurface;
};

struct RunOptions {
  bool fixation = true;           // false: translation-only motion, no rotation
  bool approach_enabled = true;
  bool lateral_dist_term = true;
  bool obstacle_avoidance = true;
  bool oracle_perception = false; // exact features/flow instead of the renderer
  bool classify_grid = true;      // grid flow, obstacle field, truth labels
  int grid_stride = 5;
  std::string frames_dir;         // non-empty: periodic PPM + flow-viz dumps
  int frame_every = 12;           // perception ticks between dumps
  double flow_viz_t = -1.0;       // >= 0: dump one dense flow viz near t
  std::string flow_viz_path;
  int viz_stride = 2;
  double stop_after_done = 0.3;   // s
  double lost_abort = 10.0;       // s of continuous Lost before giving up
};

struct RunResult {
  std::vector<RunRecord> records;          // one per perception tick
  std::vector<ClassifiedSample> classified;
  bool grasp_executed = false;
  double trigger_time = -1.0;
  double trigger_z_true = 0.0;
  double trigger_z_est = 0.0;
  double min_clearance = std::numeric_limits<double>::infinity();
  double max_lost_dwell = 0.0;
  double first_inconsistent_t = -1.0;
  Phase final_phase = Phase::Fixate;
  bool diverged = false;
  std::string failure;  // empty when the run completed cleanly
};

RunResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opts = {});

}  // namespace gazefix
