// Kinematic scene model: objects are edge-point clouds with color and
// material (opaque, translucent, mirror), optionally moving along
// piecewise-linear pose keyframes. The camera integrates body-frame twists
// exactly. visible_points resolves projection, occlusion (point splats and
// solid panel faces) and mirror reflections into per-point image samples;
// ground_truth exposes everything tests and logs need.

#pragma once

#include "gazefix/geometry.hpp"
#include "gazefix/image.hpp"

#include <Eigen/Geometry>

#include <string>
#include <vector>

namespace gazefix {

enum class MaterialKind { Opaque, Translucent, Mirror };

struct Material {
  MaterialKind kind = MaterialKind::Opaque;
  double alpha = 1.0;             // Translucent only, in (0,1)
  Vec3 mirror_point = Vec3::Zero();   // Mirror plane, object frame
  Vec3 mirror_normal = Vec3::UnitZ();
};

struct PoseKeyframe {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
};

struct Pose {
  Vec3 position = Vec3::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();  // object->world

  Vec3 apply(const Vec3& p_obj) const { return rotation * p_obj + position; }
};

struct SceneObject {
  std::string id;
  std::vector<Vec3> edge_points;  // object frame, meters
  Rgb color;
  std::vector<Rgb> point_colors;  // optional per-point override (texture)
  Material material;
  std::vector<PoseKeyframe> trajectory;  // empty => identity, static

  // Planar panels (cards, walls, mirrors) block rays through the convex
  // image footprint of their outline, not just at splatted pixels.
  bool occluding_face = false;
  Vec3 face_point = Vec3::Zero();   // object frame, with occluding_face
  Vec3 face_normal = Vec3::UnitZ();

  // Background clutter is excluded from clearance accounting.
  bool counts_for_clearance = true;

  Pose pose_at(double t) const;
};

struct CameraState {
  Vec3 position = Vec3::Zero();                                  // world
  Eigen::Quaterniond rot_wc = Eigen::Quaterniond::Identity();    // world->camera

  Vec3 to_camera(const Vec3& p_world) const {
    return rot_wc * (p_world - position);
  }
  Vec3 dir_to_camera(const Vec3& d_world) const { return rot_wc * d_world; }
  Vec3 dir_to_world(const Vec3& d_cam) const {
    return rot_wc.conjugate() * d_cam;
  }
  // Orient the camera so the optical axis points at a world target.
  static CameraState looking_at(const Vec3& position, const Vec3& target);
};

struct World {
  std::vector<SceneObject> objects;
  std::string target_id;
  double time = 0.0;

  int target_index() const;
};

// Advance camera pose by a body-frame twist over dt (exact rotation
// composition) and move scene time forward.
void step(World& world, CameraState& cam, const Twist& twist, double dt);

struct VisiblePoint {
  ImagePoint p;
  double depth = 0.0;        // camera-frame Z; virtual points carry the
                             // reflected (optical) depth
  int object_index = -1;     // source object (the reflected one if virtual)
  bool is_virtual = false;
  int through_mirror = -1;   // mirror object index for virtual points
  Rgb color;
  MaterialKind material = MaterialKind::Opaque;
  double alpha = 1.0;
  Vec3 world_velocity = Vec3::Zero();  // of the (possibly virtual) point
};

// Project every scene point, emit mirror-reflected virtual points inside
// mirror footprints, and drop points hidden by opaque splats or panel
// faces. Translucent panels hide nothing.
std::vector<VisiblePoint> visible_points(const World& world,
                                         const CameraState& cam,
                                         const Intrinsics& intr,
                                         double splat_radius_px = 2.0);

struct ObjectTruth {
  int object_index = -1;
  double nearest_depth = 0.0;  // min camera-frame Z over points in front
  DepthClass label = DepthClass::NearSurface;  // vs target depth
};

struct GroundTruth {
  double z_f = 0.0;            // target centroid depth along optical axis
  bool target_visible = false;
  std::vector<ObjectTruth> objects;  // non-target objects in front of camera
  double clearance = 0.0;      // min 3D camera-to-obstacle distance
};

GroundTruth ground_truth(const World& world, const CameraState& cam,
                         const Intrinsics& intr);

// Reflection of a point across a plane given by point + unit normal.
Vec3 reflect_across_plane(const Vec3& q, const Vec3& plane_point,
                          const Vec3& unit_normal);

}  // namespace gazefix
