#include "gazefix/runner.hpp"

#include "gazefix/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>

namespace gazefix {
namespace {

// Imperfect fixation (the gaze loop chasing centroid noise) shows up in the
// executed rotation; the angular odometry rows must budget for it or the
// filter treats servo jitter as depth signal.
constexpr double kOmegaModelSigma = 2.5e-3;  // rad/s, image pipeline only
constexpr double kGraspForwardSpeed = 0.05;  // m/s, open-loop move

struct Perception {
  std::optional<ImagePoint> feature;
  std::vector<FlowSample> target_flow;
  std::vector<FlowSample> grid_flow;
  std::vector<VisiblePoint> vis;  // geometry at the flow template time
  double z_true = 0.0;
};

ImagePoint true_centroid_feature(const World& world, const CameraState& cam) {
  const int target = world.target_index();
  const auto& obj = world.objects[target];
  const Pose pose = obj.pose_at(world.time);
  Vec3 sum = Vec3::Zero();
  for (const auto& p : obj.edge_points) sum += pose.apply(p);
  const Vec3 c = cam.to_camera(sum / double(obj.edge_points.size()));
  return {c.x() / c.z(), c.y() / c.z()};
}

}  // namespace

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Fixate: return "Fixate";
    case Phase::Approach: return "Approach";
    case Phase::Grasp: return "Grasp";
    case Phase::Done: return "Done";
    case Phase::Lost: return "Lost";
  }
  return "?";
}

RunResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opts) {
  RunResult res;
  World world = make_scene(cfg);
  CameraState cam =
      CameraState::looking_at(cfg.camera_position, cfg.camera_look_at);
  const Intrinsics intr = cfg.intrinsics;
  const ColorMask mask = target_mask(cfg);
  const int target = world.target_index();

  EkfConfig ekf_cfg = cfg.ekf;
  ekf_cfg.fixation_constraint = opts.fixation;
  if (opts.oracle_perception) {
    ekf_cfg.r_odom_v = cfg.sigma_v * cfg.sigma_v + 1e-16;
    ekf_cfg.r_odom_w = cfg.sigma_w * cfg.sigma_w + 1e-16;
  } else {
    ekf_cfg.r_odom_v = cfg.sigma_v * cfg.sigma_v + 1e-10;
    ekf_cfg.r_odom_w =
        cfg.sigma_w * cfg.sigma_w + kOmegaModelSigma * kOmegaModelSigma;
  }
  EkfState ekf = EkfState::initial();

  const double dt_c = 1.0 / cfg.control_rate;
  const int steps_per_tick = std::max(
      1, static_cast<int>(std::lround(cfg.control_rate / cfg.perception_rate)));
  const double dt_p = dt_c * steps_per_tick;
  const long total_steps = std::lround(cfg.duration * cfg.control_rate);

  Rng noise_rng(Rng::mix(cfg.seed, 0x0D0E77ED));
  Rng edge_rng(Rng::mix(cfg.seed, 0xED6E5A3F));

  RenderOptions ropts;
  ropts.noise_sigma = cfg.pixel_noise;

  const std::vector<ImagePoint> grid =
      opts.classify_grid ? image_grid_points(intr, opts.grid_stride)
                         : std::vector<ImagePoint>{};

  Phase phase = Phase::Fixate;
  double phase_since = 0.0;
  GraspTrigger trigger(cfg.gains);

  Frame prev_frame;
  bool have_prev = false;
  std::vector<ImagePoint> prev_edges;
  std::vector<VisiblePoint> prev_vis;

  ImagePoint feature{};
  bool feature_ok = false;
  ObstacleField field{};
  double z_est = 1.0, sigma_z = 2.0;
  bool lost = false;
  double lost_since = -1.0;
  double grasp_advanced = 0.0;
  double done_at = -1.0;

  Twist cmd{};
  Vec3 v_sum = Vec3::Zero(), w_sum = Vec3::Zero();
  long n_sum = 0;
  long viz_step = opts.flow_viz_t >= 0.0
                      ? std::lround(std::clamp(opts.flow_viz_t, 0.0,
                                               cfg.duration) * cfg.control_rate)
                      : -1;
  if (viz_step >= 0) {
    viz_step = (viz_step / steps_per_tick) * steps_per_tick;  // nearest tick
    if (viz_step == 0) viz_step = steps_per_tick;             // needs a pair
  }

  for (long control_step = 0; control_step <= total_steps; ++control_step) {
    const double t = control_step * dt_c;
    if (!cam.position.allFinite() || !ekf.v.allFinite()) {
      res.diverged = true;
      res.failure = "state diverged";
      break;
    }

    if (control_step % steps_per_tick == 0) {
      const long tick = control_step / steps_per_tick;
      const GroundTruth gt = ground_truth(world, cam, intr);
      res.min_clearance = std::min(res.min_clearance, gt.clearance);

      // Average executed twist since the previous tick: that is what the
      // robot's odometry reports for the flow interval.
      Twist measured{};
      if (n_sum > 0) {
        measured.v = v_sum / double(n_sum);
        measured.w = w_sum / double(n_sum);
      }
      for (int i = 0; i < 3; ++i) {
        measured.v(i) += noise_rng.gaussian(cfg.sigma_v);
        measured.w(i) += noise_rng.gaussian(cfg.sigma_w);
      }

      Perception per;
      per.z_true = gt.z_f;
      if (opts.oracle_perception) {
        per.vis = visible_points(world, cam, intr);
        if (gt.target_visible) per.feature = true_centroid_feature(world, cam);
        if (tick > 0 && gt.target_visible) {
          std::vector<ImagePoint> pts;
          for (const auto& vp : per.vis) {
            if (vp.object_index == target && !vp.is_virtual) pts.push_back(vp.p);
          }
          // Thin to the configured sample count, deterministically.
          if (static_cast<int>(pts.size()) > cfg.edge_samples) {
            std::vector<ImagePoint> thin;
            const double stride = double(pts.size()) / cfg.edge_samples;
            for (int i = 0; i < cfg.edge_samples; ++i) {
              thin.push_back(pts[static_cast<std::size_t>(i * stride)]);
            }
            pts.swap(thin);
          }
          Twist executed = measured;  // oracle flow still uses true kinematics
          executed.v = n_sum > 0 ? (v_sum / double(n_sum)).eval() : Vec3::Zero();
          executed.w = n_sum > 0 ? (w_sum / double(n_sum)).eval() : Vec3::Zero();
          per.target_flow = analytic_flow(world, cam, intr, executed, pts);
          if (opts.classify_grid) {
            per.grid_flow = analytic_flow(world, cam, intr, executed, grid);
          }
        }
      } else {
        RenderOptions ro = ropts;
        ro.noise_seed = Rng::mix(cfg.seed, static_cast<std::uint64_t>(tick));
        Frame frame = render(world, cam, intr, ro);
        const auto centroid = color_centroid(frame, mask, intr);
        if (centroid) per.feature = *centroid;
        if (have_prev && !prev_edges.empty()) {
          per.target_flow = gradient_flow(prev_frame, frame, prev_edges, intr);
        }
        if (have_prev && opts.classify_grid) {
          per.grid_flow = gradient_flow(prev_frame, frame, grid, intr);
        }
        per.vis = prev_vis;  // matches the flow template frame

        if (!opts.frames_dir.empty() && tick % opts.frame_every == 0) {
          char name[64];
          std::snprintf(name, sizeof(name), "/frame_%05ld.ppm", tick);
          write_ppm(frame, opts.frames_dir + name);
          if (!per.grid_flow.empty()) {
            std::snprintf(name, sizeof(name), "/flow_%05ld.ppm", tick);
            write_ppm(flow_visualization(per.grid_flow, intr, opts.grid_stride),
                      opts.frames_dir + name);
          }
        }
        if (viz_step == control_step && have_prev && !opts.flow_viz_path.empty()) {
          const auto dense = image_grid_points(intr, opts.viz_stride);
          const auto dense_flow = gradient_flow(prev_frame, frame, dense, intr);
          write_ppm(flow_visualization(dense_flow, intr, opts.viz_stride),
                    opts.flow_viz_path);
        }

        prev_edges = sample_edge_points(frame, mask, intr, cfg.edge_samples, edge_rng);
        prev_vis = visible_points(world, cam, intr);
        prev_frame = std::move(frame);
        have_prev = true;
      }

      feature_ok = per.feature.has_value();
      if (feature_ok) feature = *per.feature;
      lost = !feature_ok;

      bool consistent = true;
      if (phase != Phase::Grasp && phase != Phase::Done) {
        if (tick > 0) ekf = predict(ekf, ekf_cfg, dt_p);
        EkfConfig tick_cfg = ekf_cfg;
        // Fixation only constrains the rotation while the servo actually
        // holds the target; when it is lost the executed rotation tells us
        // nothing about d_f.
        if (lost) tick_cfg.fixation_constraint = false;
        FlowObservation obs;
        obs.dt = dt_p;
        obs.measured_twist = measured;
        obs.samples = per.target_flow;
        const auto check = check_consistency(ekf, tick_cfg, obs);
        consistent = check.consistent;
        if (consistent) {
          ekf = update(ekf, tick_cfg, obs);
        } else {
          ekf = check.state;
          if (res.first_inconsistent_t < 0.0) res.first_inconsistent_t = t;
        }
      }
      std::tie(z_est, sigma_z) = estimated_distance(ekf);

      // Obstacle field + truth-labelled classification from the grid flow.
      if (opts.classify_grid && !per.grid_flow.empty()) {
        const Vec2 v_xy{measured.v.x(), measured.v.y()};
        if (opts.obstacle_avoidance) {
          if (const auto f = obstacle_field(per.grid_flow, v_xy, cfg.classify_eps)) {
            field = *f;
          }
        }
        for (const auto& s : per.grid_flow) {
          if (!s.valid) continue;
          const auto measured_class =
              classify_depth(s.flow, v_xy, cfg.classify_eps);
          if (!measured_class) continue;
          const Vec2 q = to_pixel(s.p, intr);
          double best = 3.5 * 3.5;
          const VisiblePoint* hit = nullptr;
          for (const auto& vp : per.vis) {
            const double d2 = (to_pixel(vp.p, intr) - q).squaredNorm();
            if (d2 < best) {
              best = d2;
              hit = &vp;
            }
          }
          if (!hit) continue;
          ClassifiedSample c;
          c.t = t;
          c.object_index = hit->object_index;
          c.is_virtual = hit->is_virtual;
          c.truth = hit->depth < per.z_true ? DepthClass::Front : DepthClass::Behind;
          c.measured = *measured_class;
          res.classified.push_back(c);
        }
      }

      // Phase machine.
      const Phase prev_phase = phase;
      switch (phase) {
        case Phase::Fixate:
          if (lost) {
            phase = Phase::Lost;
          } else if (opts.approach_enabled && consistent && sigma_z < 0.02 &&
                     feature.norm() < 0.06 && t - phase_since > 0.8) {
            phase = Phase::Approach;
          }
          break;
        case Phase::Approach:
          if (lost) {
            phase = Phase::Lost;
          } else if (trigger.update(z_est, sigma_z, t) ==
                     GraspDecision::ExecuteGrasp) {
            phase = Phase::Grasp;
            res.grasp_executed = true;
            res.trigger_time = t;
            res.trigger_z_true = gt.z_f;
            res.trigger_z_est = z_est;
            grasp_advanced = 0.0;
          }
          break;
        case Phase::Grasp:
          if (grasp_advanced >= cfg.gains.z_desired) {
            phase = Phase::Done;
            done_at = t;
          }
          break;
        case Phase::Done:
          break;
        case Phase::Lost:
          if (!lost) {
            phase = Phase::Fixate;
            trigger.reset();
          }
          break;
      }
      if (phase == Phase::Lost) {
        if (lost_since < 0.0) lost_since = t;
        res.max_lost_dwell = std::max(res.max_lost_dwell, t - lost_since);
        if (t - lost_since > opts.lost_abort) {
          res.failure = "target lost";
          break;
        }
      } else {
        lost_since = -1.0;
      }
      if (phase != prev_phase) phase_since = t;

      RunRecord rec;
      rec.t = t;
      rec.z_f_true = gt.z_f;
      rec.z_f_est = z_est;
      rec.sigma_z = sigma_z;
      rec.feature_error = feature_ok ? feature.norm() : -1.0;
      rec.obs_mass = field.mass;
      rec.clearance = gt.clearance;
      rec.phase = phase;
      rec.consistent = consistent;
      res.records.push_back(rec);

      v_sum.setZero();
      w_sum.setZero();
      n_sum = 0;
      if (done_at >= 0.0 && t - done_at >= opts.stop_after_done) break;
    }

    // Control law at the fast rate, holding the latest perception.
    switch (phase) {
      case Phase::Fixate:
      case Phase::Approach: {
        if (opts.fixation) {
          const Vec2 w_gaze = feature_ok
                                  ? gaze_servo(feature, cfg.gains.lambda_xy)
                                  : Vec2::Zero();
          Gains g = cfg.gains;
          if (!opts.lateral_dist_term) g.lambda_dist.setZero();
          const Vec2 v_xy = lateral_servo(
              z_est, t, opts.obstacle_avoidance ? field : ObstacleField{}, g);
          const double v_z =
              phase == Phase::Approach ? approach_servo(z_est, cfg.gains) : 0.0;
          cmd = compose_twist(w_gaze, v_z, v_xy, 1.0 / z_est, cfg.gains);
        } else {
          Gains g = cfg.gains;
          if (!opts.lateral_dist_term) g.lambda_dist.setZero();
          const Vec2 v_xy = lateral_servo(z_est, t, ObstacleField{}, g);
          cmd = Twist{};
          cmd.v.x() = std::clamp(v_xy.x(), -g.max_linear, g.max_linear);
          cmd.v.y() = std::clamp(v_xy.y(), -g.max_linear, g.max_linear);
        }
        break;
      }
      case Phase::Lost: {
        // Sweep on the cycle alone; the coupling feedforward keeps the
        // camera plausibly oriented while the detector hunts.
        Gains g = cfg.gains;
        g.lambda_dist.setZero();
        const Vec2 v_xy = lateral_servo(z_est, t, ObstacleField{}, g);
        cmd = opts.fixation
                  ? compose_twist(Vec2::Zero(), 0.0, v_xy, 1.0 / z_est, cfg.gains)
                  : Twist{};
        if (!opts.fixation) {
          cmd.v.x() = std::clamp(v_xy.x(), -g.max_linear, g.max_linear);
          cmd.v.y() = std::clamp(v_xy.y(), -g.max_linear, g.max_linear);
        }
        break;
      }
      case Phase::Grasp:
        cmd = Twist{};
        cmd.v.z() = kGraspForwardSpeed;
        grasp_advanced += kGraspForwardSpeed * dt_c;
        break;
      case Phase::Done:
        cmd = Twist{};
        break;
    }

    v_sum += cmd.v;
    w_sum += cmd.w;
    ++n_sum;
    step(world, cam, cmd, dt_c);
  }

  res.final_phase = phase;
  return res;
}

}  // namespace gazefix
