// Pinhole projection and the analytic image-motion models of a fixating
// camera: the point interaction matrix, the rotation/translation coupling
// that fixation imposes, the reduced flow field and its small-FOV
// approximation, flow-sign depth classification, and distance recovery
// from the rotation-to-translation ratio.
//
// Camera frame: right-handed, Z forward along the optical axis, X right,
// Y down. Image coordinates are normalized (unit focal length).

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <optional>

namespace gazefix {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = 3.14159265358979323846;

// Below this lateral speed the fixation geometry degenerates: coupling,
// depth classification and the distance ratio all lose meaning.
inline constexpr double kLateralVelocityFloor = 1e-3;  // m/s

// Default dead-band for flow-sign classification, in normalized units/s
// of flow projected onto the motion direction.
inline constexpr double kDepthBandEps = 0.1;

struct Intrinsics {
  double focal_length = 1.0;  // normalized image plane convention
  int width = 128;
  int height = 128;
  double half_fov = 25.0 * kPi / 180.0;  // radians

  double tan_half_fov() const { return std::tan(half_fov); }

  // Pixels per normalized image unit (square pixels, width-referenced).
  double focal_px() const { return 0.5 * width / tan_half_fov(); }

  bool valid() const {
    return focal_length > 0 && width > 0 && height > 0 && half_fov > 0 &&
           half_fov < 0.5 * kPi;
  }
};

// Normalized image coordinates (focal-length units).
struct ImagePoint {
  double x = 0.0;
  double y = 0.0;

  Vec2 vec() const { return {x, y}; }
  double norm() const { return std::hypot(x, y); }
};

// 6-DOF instantaneous camera-frame velocity.
struct Twist {
  Vec3 v = Vec3::Zero();  // m/s
  Vec3 w = Vec3::Zero();  // rad/s
};

enum class DepthClass { Front, Behind, NearSurface };

// Pixel <-> normalized conversions. Pixel (0,0) is the top-left corner;
// the principal point sits at the image center.
Vec2 to_pixel(const ImagePoint& p, const Intrinsics& intr);
ImagePoint from_pixel(double px, double py, const Intrinsics& intr);

// Perspective projection of a camera-frame point. Empty when the point is
// behind the camera or outside the view cone (|p| > tan half_fov).
std::optional<ImagePoint> project(const Vec3& point_cam, const Intrinsics& intr);

// Velocity of a projected point under camera twist, for a static scene
// point at disparity d = 1/Z.
Vec2 image_velocity(const ImagePoint& p, double disparity, const Twist& twist);

// Rotation entailed by holding a point at inverse depth d_f fixed at the
// image center while translating laterally: (w_X, w_Y) = d_f*(v_Y, -v_X).
Vec2 fixation_coupling(const Vec2& v_xy, double fixation_disparity);

// Flow of a point at disparity d while fixating at disparity d_f, with
// v_Z = w_Z = 0: [d_f*(I + p p^T) - d*I] * v_xy. Equals image_velocity
// composed with fixation_coupling.
Vec2 fixated_flow_exact(const ImagePoint& p, double disparity,
                        double fixation_disparity, const Vec2& v_xy);

// Small-FOV limit of the fixated flow: (d_f - d) * v_xy.
Vec2 fixated_flow_approx(double disparity, double fixation_disparity,
                         const Vec2& v_xy);

// Flow-sign test against lateral motion. Front when flow opposes v_xy
// (nearer than fixation), Behind when it follows it, NearSurface inside
// the eps dead-band. Empty when |v_xy| is below the floor.
std::optional<DepthClass> classify_depth(const Vec2& flow, const Vec2& v_xy,
                                         double eps,
                                         double v_floor = kLateralVelocityFloor);

// Distance to the fixated point from the rotation/translation ratio:
// least-squares solve of the coupling for d_f, Z_f = 1/d_f. Empty when
// lateral motion is insufficient or the solve lands at d_f <= 0.
std::optional<double> distance_from_ratio(const Twist& twist,
                                          double v_floor = kLateralVelocityFloor);

}  // namespace gazefix
