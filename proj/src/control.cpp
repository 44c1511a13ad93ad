#include "gazefix/control.hpp"

#include <cmath>
#include <stdexcept>

namespace gazefix {

Vec2 gaze_servo(const ImagePoint& feature, double lambda_xy) {
  const double x = feature.x, y = feature.y;
  const double det = 1.0 + x * x + y * y;
  // J = [[xy, -(1+x^2)], [(1+y^2), -xy]]; inverse scaled by 1/det.
  const double ix00 = -x * y, ix01 = 1.0 + x * x;
  const double ix10 = -(1.0 + y * y), ix11 = x * y;
  return {-lambda_xy * (ix00 * x + ix01 * y) / det,
          -lambda_xy * (ix10 * x + ix11 * y) / det};
}

double gaze_jacobian_det(const ImagePoint& p) {
  return 1.0 + p.x * p.x + p.y * p.y;
}

double approach_servo(double z_f, const Gains& gains) {
  if (!(z_f > 0.0) || !(gains.z_desired > 0.0)) {
    throw std::invalid_argument("approach_servo: non-positive distance");
  }
  return gains.lambda_z * std::log(z_f / gains.z_desired);
}

Vec2 lateral_servo(double z_f, double t, const ObstacleField& obs,
                   const Gains& gains) {
  const double phase = gains.cycle_omega * t;
  return gains.lambda_dist * (z_f - gains.z_desired) +
         Vec2(gains.lambda_cycle.x() * std::sin(phase),
              gains.lambda_cycle.y() * std::cos(phase)) -
         gains.lambda_obs * obs.obs_xy;
}

std::optional<ObstacleField> obstacle_field(std::span<const FlowSample> samples,
                                            const Vec2& v_xy, double eps,
                                            double v_floor) {
  const double speed = v_xy.norm();
  if (speed < v_floor) return std::nullopt;
  ObstacleField field;
  for (const auto& s : samples) {
    if (!s.valid) continue;
    if (s.flow.dot(v_xy) < -eps * speed) {
      field.obs_xy += s.p.vec();
      field.mass += 1.0;
    }
  }
  if (field.mass > 0.0) field.obs_xy /= field.mass;
  return field;
}

Twist compose_twist(const Vec2& w_gaze, double v_z, const Vec2& v_xy,
                    double d_f_est, const Gains& gains) {
  Twist cmd;
  cmd.v.x() = v_xy.x();
  cmd.v.y() = v_xy.y();
  // Approach stays slower than the lateral sweep so parallax keeps
  // dominating the flow field.
  const double vz_cap = gains.approach_ratio * v_xy.norm();
  cmd.v.z() = std::clamp(v_z, -vz_cap, vz_cap);

  const Vec2 w_fix = fixation_coupling(v_xy, d_f_est);
  cmd.w.x() = w_gaze.x() + w_fix.x();
  cmd.w.y() = w_gaze.y() + w_fix.y();
  cmd.w.z() = 0.0;

  for (int i = 0; i < 3; ++i) {
    cmd.v(i) = std::clamp(cmd.v(i), -gains.max_linear, gains.max_linear);
    cmd.w(i) = std::clamp(cmd.w(i), -gains.max_angular, gains.max_angular);
  }
  return cmd;
}

GraspDecision GraspTrigger::update(double z_f, double sigma_z, double t) {
  const bool ok = std::abs(z_f - gains_.z_desired) < gains_.grasp_tol_z &&
                  sigma_z < gains_.grasp_sigma_max;
  if (!ok) {
    window_start_ = -1.0;
    return GraspDecision::Continue;
  }
  if (window_start_ < 0.0) window_start_ = t;
  return t - window_start_ >= gains_.grasp_dwell ? GraspDecision::ExecuteGrasp
                                                 : GraspDecision::Continue;
}

}  // namespace gazefix
