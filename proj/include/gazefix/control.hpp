// Reactive servo laws: gaze fixation (image-Jacobian feedback plus coupling
// feedforward), log-ratio approach, the three-term lateral heuristic, the
// opposing-flow obstacle potential field, and the open-loop grasp trigger.

#pragma once

#include "gazefix/geometry.hpp"
#include "gazefix/optics.hpp"

#include <optional>
#include <span>

namespace gazefix {

struct Gains {
  double lambda_xy = 4.0;   // 1/s, gaze
  double lambda_z = 0.3;    // 1/s, approach
  Vec2 lambda_dist{0.5, 0.0};    // 1/(m s), distance-driven lateral motion
  Vec2 lambda_cycle{0.03, 0.03}; // m/s, periodic sweep amplitude
  double cycle_omega = 1.5;      // rad/s
  double lambda_obs = 0.15;      // m/s per unit of obstacle offset
  double z_desired = 0.15;       // m

  double max_linear = 0.3;       // m/s, per-axis clamp
  double max_angular = 1.5;      // rad/s
  double approach_ratio = 0.3;   // |v_Z| <= ratio * |v_XY|

  double grasp_tol_z = 0.005;    // m
  double grasp_sigma_max = 0.003;  // m
  double grasp_dwell = 0.5;      // s
};

struct ObstacleField {
  Vec2 obs_xy = Vec2::Zero();  // normalized coords, center of mass
  double mass = 0.0;           // count of opposing-flow samples
};

// Rotation bringing the feature to the image center: -lambda * J^-1 * e with
// J the rotational image Jacobian at the feature. det(J) = 1 + x^2 + y^2, so
// the inversion never degenerates.
Vec2 gaze_servo(const ImagePoint& feature, double lambda_xy);

double gaze_jacobian_det(const ImagePoint& p);

// v_Z = lambda_z * log(Z_f / Z_d): closes in when too far, retreats when too
// close. Throws std::invalid_argument for non-positive distances.
double approach_servo(double z_f, const Gains& gains);

// Distance-driven + cyclic + obstacle-repulsion lateral velocity.
Vec2 lateral_servo(double z_f, double t, const ObstacleField& obs,
                   const Gains& gains);

// Potential field over samples whose flow opposes the lateral motion
// (nearer than fixation). Empty when lateral motion is below the floor.
std::optional<ObstacleField> obstacle_field(std::span<const FlowSample> samples,
                                            const Vec2& v_xy, double eps,
                                            double v_floor = kLateralVelocityFloor);

// Assemble the 6-DOF command: lateral + approach translation, gaze feedback
// plus fixation-coupling feedforward rotation, w_Z held at zero, everything
// clamped to the configured limits.
Twist compose_twist(const Vec2& w_gaze, double v_z, const Vec2& v_xy,
                    double d_f_est, const Gains& gains);

enum class GraspDecision { Continue, ExecuteGrasp };

// Fires once the distance estimate sits at Z_d, certain and stable, for a
// full dwell window.
class GraspTrigger {
 public:
  explicit GraspTrigger(const Gains& gains) : gains_(gains) {}

  GraspDecision update(double z_f, double sigma_z, double t);
  void reset() { window_start_ = -1.0; }
  double forward_distance() const { return gains_.z_desired; }

 private:
  Gains gains_;
  double window_start_ = -1.0;
};

}  // namespace gazefix
