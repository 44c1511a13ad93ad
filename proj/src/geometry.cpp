#include "gazefix/geometry.hpp"

namespace gazefix {

Vec2 to_pixel(const ImagePoint& p, const Intrinsics& intr) {
  const double f = intr.focal_px();
  return {0.5 * intr.width + f * p.x, 0.5 * intr.height + f * p.y};
}

ImagePoint from_pixel(double px, double py, const Intrinsics& intr) {
  const double f = intr.focal_px();
  return {(px - 0.5 * intr.width) / f, (py - 0.5 * intr.height) / f};
}

std::optional<ImagePoint> project(const Vec3& point_cam, const Intrinsics& intr) {
  const double z = point_cam.z();
  if (z <= 0.0) return std::nullopt;
  const ImagePoint p{point_cam.x() / z, point_cam.y() / z};
  if (p.norm() > intr.tan_half_fov()) return std::nullopt;
  return p;
}

Vec2 image_velocity(const ImagePoint& p, double disparity, const Twist& twist) {
  const double x = p.x, y = p.y, d = disparity;
  const Vec3& v = twist.v;
  const Vec3& w = twist.w;
  return {d * (-v.x() + x * v.z()) + x * y * w.x() - (1.0 + x * x) * w.y() + y * w.z(),
          d * (-v.y() + y * v.z()) + (1.0 + y * y) * w.x() - x * y * w.y() - x * w.z()};
}

Vec2 fixation_coupling(const Vec2& v_xy, double fixation_disparity) {
  return {v_xy.y() * fixation_disparity, -v_xy.x() * fixation_disparity};
}

Vec2 fixated_flow_exact(const ImagePoint& p, double disparity,
                        double fixation_disparity, const Vec2& v_xy) {
  const double x = p.x, y = p.y, d = disparity, df = fixation_disparity;
  return {((1.0 + x * x) * df - d) * v_xy.x() + x * y * df * v_xy.y(),
          x * y * df * v_xy.x() + ((1.0 + y * y) * df - d) * v_xy.y()};
}

Vec2 fixated_flow_approx(double disparity, double fixation_disparity,
                         const Vec2& v_xy) {
  return (fixation_disparity - disparity) * v_xy;
}

std::optional<DepthClass> classify_depth(const Vec2& flow, const Vec2& v_xy,
                                         double eps, double v_floor) {
  const double speed = v_xy.norm();
  if (speed < v_floor) return std::nullopt;
  const double dot = flow.dot(v_xy);
  if (dot < -eps * speed) return DepthClass::Front;
  if (dot > eps * speed) return DepthClass::Behind;
  return DepthClass::NearSurface;
}

std::optional<double> distance_from_ratio(const Twist& twist, double v_floor) {
  const double vx = twist.v.x(), vy = twist.v.y();
  const double speed_sq = vx * vx + vy * vy;
  if (speed_sq < v_floor * v_floor) return std::nullopt;
  const double d_f = (vy * twist.w.x() - vx * twist.w.y()) / speed_sq;
  if (d_f <= 0.0) return std::nullopt;
  return 1.0 / d_f;
}

}  // namespace gazefix
