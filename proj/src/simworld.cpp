#include "gazefix/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gazefix {
namespace {

constexpr double kVelocityFd = 5e-4;  // s, trajectory finite-difference step

Pose lerp_pose(const PoseKeyframe& a, const PoseKeyframe& b, double t) {
  const double span = b.t - a.t;
  const double u = span > 0.0 ? std::clamp((t - a.t) / span, 0.0, 1.0) : 1.0;
  Pose out;
  out.position = (1.0 - u) * a.position + u * b.position;
  out.rotation = a.rotation.slerp(u, b.rotation);
  return out;
}

// 2D convex hull (monotone chain), CCW. Input order irrelevant.
std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  if (pts.size() < 3) return {};
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  const std::size_t lower = k + 1;
  for (auto it = pts.rbegin() + 1, end = pts.rend(); it != end; ++it) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], *it) <= 0) --k;
    hull[k++] = *it;
  }
  hull.resize(k > 1 ? k - 1 : 0);
  return hull.size() >= 3 ? hull : std::vector<Vec2>{};
}

bool inside_hull(const std::vector<Vec2>& hull, const Vec2& p) {
  if (hull.size() < 3) return false;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vec2& a = hull[i];
    const Vec2& b = hull[(i + 1) % hull.size()];
    const double c = (b.x() - a.x()) * (p.y() - a.y()) -
                     (b.y() - a.y()) * (p.x() - a.x());
    if (c < 0.0) return false;
  }
  return true;
}

struct FacePlane {
  int object_index = -1;
  Vec3 point_cam = Vec3::Zero();   // plane anchor, camera frame
  Vec3 normal_cam = Vec3::Zero();
  std::vector<Vec2> footprint;     // convex hull, normalized image coords
  MaterialKind kind = MaterialKind::Opaque;

  // Depth of the plane along the viewing ray of normalized point p.
  double ray_depth(const ImagePoint& p) const {
    const Vec3 ray(p.x, p.y, 1.0);
    const double denom = normal_cam.dot(ray);
    if (std::abs(denom) < 1e-12) return -1.0;
    return normal_cam.dot(point_cam) / denom;
  }
};

}  // namespace

Pose SceneObject::pose_at(double t) const {
  if (trajectory.empty()) return {};
  if (trajectory.size() == 1 || t <= trajectory.front().t) {
    const auto& k = trajectory.front();
    return {k.position, k.rotation};
  }
  if (t >= trajectory.back().t) {
    const auto& k = trajectory.back();
    return {k.position, k.rotation};
  }
  auto it = std::upper_bound(
      trajectory.begin(), trajectory.end(), t,
      [](double value, const PoseKeyframe& k) { return value < k.t; });
  return lerp_pose(*(it - 1), *it, t);
}

CameraState CameraState::looking_at(const Vec3& position, const Vec3& target) {
  CameraState cam;
  cam.position = position;
  const Vec3 z = (target - position).normalized();
  Vec3 helper = std::abs(z.y()) > 0.99 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 x = helper.cross(z).normalized();
  const Vec3 y = z.cross(x);
  Eigen::Matrix3d r_cw;
  r_cw.col(0) = x;
  r_cw.col(1) = y;
  r_cw.col(2) = z;
  cam.rot_wc = Eigen::Quaterniond(r_cw.transpose()).normalized();
  return cam;
}

int World::target_index() const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].id == target_id) return static_cast<int>(i);
  }
  return -1;
}

void step(World& world, CameraState& cam, const Twist& twist, double dt) {
  cam.position += cam.rot_wc.conjugate() * (twist.v * dt);
  const double angle = twist.w.norm() * dt;
  if (angle > 0.0) {
    const Eigen::Quaterniond dq(
        Eigen::AngleAxisd(-angle, twist.w.normalized()));
    cam.rot_wc = (dq * cam.rot_wc).normalized();
  }
  world.time += dt;
}

Vec3 reflect_across_plane(const Vec3& q, const Vec3& plane_point,
                          const Vec3& unit_normal) {
  return q - 2.0 * (q - plane_point).dot(unit_normal) * unit_normal;
}

std::vector<VisiblePoint> visible_points(const World& world,
                                         const CameraState& cam,
                                         const Intrinsics& intr,
                                         double splat_radius_px) {
  struct Candidate {
    VisiblePoint vp;
  };
  const double t = world.time;
  const int n_objects = static_cast<int>(world.objects.size());

  // World-frame points and velocities per object at the current time.
  std::vector<std::vector<Vec3>> pts(n_objects), pts_m(n_objects), pts_p(n_objects);
  for (int i = 0; i < n_objects; ++i) {
    const auto& obj = world.objects[i];
    const Pose now = obj.pose_at(t);
    const Pose before = obj.pose_at(t - kVelocityFd);
    const Pose after = obj.pose_at(t + kVelocityFd);
    pts[i].reserve(obj.edge_points.size());
    pts_m[i].reserve(obj.edge_points.size());
    pts_p[i].reserve(obj.edge_points.size());
    for (const auto& p : obj.edge_points) {
      pts[i].push_back(now.apply(p));
      pts_m[i].push_back(before.apply(p));
      pts_p[i].push_back(after.apply(p));
    }
  }

  // Panel faces (occluders) and mirror planes, with image footprints.
  std::vector<FacePlane> faces;
  for (int i = 0; i < n_objects; ++i) {
    const auto& obj = world.objects[i];
    if (!obj.occluding_face && obj.material.kind != MaterialKind::Mirror) continue;
    const Pose pose = obj.pose_at(t);
    FacePlane face;
    face.object_index = i;
    face.kind = obj.material.kind;
    const Vec3 anchor = obj.material.kind == MaterialKind::Mirror
                            ? obj.material.mirror_point
                            : obj.face_point;
    const Vec3 normal = obj.material.kind == MaterialKind::Mirror
                            ? obj.material.mirror_normal
                            : obj.face_normal;
    face.point_cam = cam.to_camera(pose.apply(anchor));
    face.normal_cam = (cam.rot_wc * (pose.rotation * normal)).normalized();
    std::vector<Vec2> proj;
    proj.reserve(pts[i].size());
    for (const auto& q : pts[i]) {
      const Vec3 q_cam = cam.to_camera(q);
      if (q_cam.z() > 1e-6) proj.push_back({q_cam.x() / q_cam.z(), q_cam.y() / q_cam.z()});
    }
    face.footprint = convex_hull(std::move(proj));
    faces.push_back(std::move(face));
  }

  std::vector<Candidate> candidates;
  auto add_candidate = [&](const Vec3& q_world, const Vec3& vel_world,
                           int object_index, std::size_t point_index,
                           bool is_virtual, int through_mirror) {
    const Vec3 q_cam = cam.to_camera(q_world);
    const auto p = project(q_cam, intr);
    if (!p) return;
    const auto& obj = world.objects[object_index];
    VisiblePoint vp;
    vp.p = *p;
    vp.depth = q_cam.z();
    vp.object_index = object_index;
    vp.is_virtual = is_virtual;
    vp.through_mirror = through_mirror;
    vp.color = obj.point_colors.empty() ? obj.color : obj.point_colors[point_index];
    vp.material = is_virtual ? MaterialKind::Opaque : obj.material.kind;
    vp.alpha = is_virtual ? 1.0 : obj.material.alpha;
    vp.world_velocity = vel_world;
    if (is_virtual) {
      bool inside = false;
      for (const auto& face : faces) {
        if (face.object_index == through_mirror &&
            inside_hull(face.footprint, p->vec())) {
          inside = true;
          break;
        }
      }
      if (!inside) return;
    }
    candidates.push_back({vp});
  };

  for (int i = 0; i < n_objects; ++i) {
    for (std::size_t k = 0; k < pts[i].size(); ++k) {
      const Vec3 vel = (pts_p[i][k] - pts_m[i][k]) / (2.0 * kVelocityFd);
      add_candidate(pts[i][k], vel, i, k, false, -1);
    }
  }

  // Mirror reflections: virtual images of every other object's points,
  // visible only through the mirror footprint, at the reflected depth.
  for (int m = 0; m < n_objects; ++m) {
    const auto& mirror = world.objects[m];
    if (mirror.material.kind != MaterialKind::Mirror) continue;
    const Pose pose_now = mirror.pose_at(t);
    const Pose pose_m = mirror.pose_at(t - kVelocityFd);
    const Pose pose_p = mirror.pose_at(t + kVelocityFd);
    auto plane_of = [&](const Pose& pose) {
      const Vec3 p0 = pose.apply(mirror.material.mirror_point);
      const Vec3 n = (pose.rotation * mirror.material.mirror_normal).normalized();
      return std::make_pair(p0, n);
    };
    auto [p0, n] = plane_of(pose_now);
    if ((cam.position - p0).dot(n) < 0.0) n = -n;
    if ((cam.position - p0).dot(n) < 1e-9) continue;  // camera on the plane
    auto [p0m, nm] = plane_of(pose_m);
    if ((cam.position - p0m).dot(nm) < 0.0) nm = -nm;
    auto [p0p, np] = plane_of(pose_p);
    if ((cam.position - p0p).dot(np) < 0.0) np = -np;
    for (int i = 0; i < n_objects; ++i) {
      if (i == m || world.objects[i].material.kind == MaterialKind::Mirror) continue;
      for (std::size_t k = 0; k < pts[i].size(); ++k) {
        if ((pts[i][k] - p0).dot(n) <= 1e-9) continue;  // behind the glass
        const Vec3 q = reflect_across_plane(pts[i][k], p0, n);
        const Vec3 qm = reflect_across_plane(pts_m[i][k], p0m, nm);
        const Vec3 qp = reflect_across_plane(pts_p[i][k], p0p, np);
        const Vec3 vel = (qp - qm) / (2.0 * kVelocityFd);
        add_candidate(q, vel, i, k, true, m);
      }
    }
  }

  // Panel-face occlusion.
  auto face_occluded = [&](const VisiblePoint& vp) {
    for (const auto& face : faces) {
      if (face.object_index == vp.object_index && !vp.is_virtual) continue;
      if (vp.is_virtual && face.object_index == vp.through_mirror) continue;
      if (!inside_hull(face.footprint, vp.p.vec())) continue;
      const double s = face.ray_depth(vp.p);
      if (s > 1e-6 && s < vp.depth - 1e-6) return true;
    }
    return false;
  };
  std::vector<VisiblePoint> kept;
  kept.reserve(candidates.size());
  for (const auto& c : candidates) {
    if (!face_occluded(c.vp)) kept.push_back(c.vp);
  }

  // Splat z-buffer over opaque content; a point survives when nothing
  // strictly nearer covers its own center pixel.
  const int w = intr.width, h = intr.height;
  std::vector<float> zbuf(static_cast<std::size_t>(w) * h,
                          std::numeric_limits<float>::infinity());
  const double r = splat_radius_px;
  auto for_each_splat_pixel = [&](const ImagePoint& p, auto&& fn) {
    const Vec2 px = to_pixel(p, intr);
    const int x0 = std::max(0, static_cast<int>(std::floor(px.x() - r)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(px.x() + r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(px.y() - r)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(px.y() + r)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - px.x();
        const double dy = y + 0.5 - px.y();
        if (dx * dx + dy * dy <= r * r) fn(x, y);
      }
    }
  };
  for (const auto& vp : kept) {
    if (vp.material == MaterialKind::Translucent) continue;
    for_each_splat_pixel(vp.p, [&](int x, int y) {
      float& z = zbuf[static_cast<std::size_t>(y) * w + x];
      z = std::min(z, static_cast<float>(vp.depth));
    });
  }
  std::vector<VisiblePoint> out;
  out.reserve(kept.size());
  for (const auto& vp : kept) {
    const Vec2 px = to_pixel(vp.p, intr);
    const int cx = std::clamp(static_cast<int>(std::floor(px.x())), 0, w - 1);
    const int cy = std::clamp(static_cast<int>(std::floor(px.y())), 0, h - 1);
    if (zbuf[static_cast<std::size_t>(cy) * w + cx] >= vp.depth - 1e-6) {
      out.push_back(vp);
    }
  }
  return out;
}

GroundTruth ground_truth(const World& world, const CameraState& cam,
                         const Intrinsics& intr) {
  GroundTruth gt;
  const int target = world.target_index();
  gt.clearance = std::numeric_limits<double>::infinity();

  Vec3 centroid = Vec3::Zero();
  std::size_t n_target = 0;
  for (int i = 0; i < static_cast<int>(world.objects.size()); ++i) {
    const auto& obj = world.objects[i];
    const Pose pose = obj.pose_at(world.time);
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& p : obj.edge_points) {
      const Vec3 q = pose.apply(p);
      if (i == target) {
        centroid += q;
        ++n_target;
      } else {
        if (obj.counts_for_clearance) {
          gt.clearance = std::min(gt.clearance, (q - cam.position).norm());
        }
        const double z = cam.to_camera(q).z();
        if (z > 0.0) nearest = std::min(nearest, z);
      }
    }
    if (i != target && std::isfinite(nearest)) {
      gt.objects.push_back({i, nearest, DepthClass::NearSurface});
    }
  }
  if (n_target > 0) {
    gt.z_f = cam.to_camera(centroid / static_cast<double>(n_target)).z();
  }
  for (auto& o : gt.objects) {
    o.label = o.nearest_depth < gt.z_f ? DepthClass::Front : DepthClass::Behind;
  }
  if (target >= 0) {
    for (const auto& vp : visible_points(world, cam, intr)) {
      if (vp.object_index == target && !vp.is_virtual) {
        gt.target_visible = true;
        break;
      }
    }
  }
  return gt;
}

}  // namespace gazefix
