#include "gazefix/scenario.hpp"
#include "gazefix/rng.hpp"

#include <doctest.h>

using namespace gazefix;

namespace {

SceneObject point_object(const std::string& id, const Vec3& p, Rgb color,
                         MaterialKind kind = MaterialKind::Opaque) {
  SceneObject o;
  o.id = id;
  o.edge_points = {Vec3::Zero()};
  o.color = color;
  o.material.kind = kind;
  PoseKeyframe k;
  k.position = p;
  o.trajectory = {k};
  return o;
}

SceneObject mirror_panel(const std::string& id, const Vec3& center,
                         const Vec3& facing, double size) {
  SceneObject o;
  o.id = id;
  o.color = {70, 70, 80};
  const double h = 0.5 * size;
  for (int i = 0; i < 24; ++i) {
    const double s = -h + size * i / 24.0;
    o.edge_points.push_back({s, -h, 0.0});
    o.edge_points.push_back({h, s, 0.0});
    o.edge_points.push_back({-s, h, 0.0});
    o.edge_points.push_back({-h, -s, 0.0});
  }
  o.material.kind = MaterialKind::Mirror;
  o.material.mirror_point = Vec3::Zero();
  o.material.mirror_normal = Vec3::UnitZ();
  o.occluding_face = true;
  PoseKeyframe k;
  k.position = center;
  k.rotation = Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), facing);
  o.trajectory = {k};
  return o;
}

}  // namespace

TEST_SUITE_BEGIN("simworld");

TEST_CASE("camera step basics") {
  World world;
  CameraState cam;

  SUBCASE("zero twist leaves the pose alone") {
    step(world, cam, Twist{}, 0.1);
    CHECK(cam.position.norm() == 0.0);
    CHECK(cam.rot_wc.angularDistance(Eigen::Quaterniond::Identity()) == 0.0);
  }

  SUBCASE("forward motion moves along the optical axis") {
    Twist t;
    t.v = {0.0, 0.0, 0.1};
    step(world, cam, t, 0.1);
    CHECK((cam.position - Vec3(0.0, 0.0, 0.01)).norm() < 1e-15);
  }

  SUBCASE("half-turn yaw stays orthonormal") {
    Twist t;
    t.w = {0.0, kPi, 0.0};
    step(world, cam, t, 1.0);
    const Eigen::Matrix3d r = cam.rot_wc.toRotationMatrix();
    CHECK((r * r.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-12);
    // Looking backward now: a point ahead in the world sits behind the camera.
    CHECK(cam.to_camera({0.0, 0.0, 1.0}).z() == doctest::Approx(-1.0));
  }
}

TEST_CASE("looking_at points the optical axis at the target") {
  const CameraState cam = CameraState::looking_at({0.2, -0.1, 0.0}, {0.0, 0.0, 0.5});
  const Vec3 target_cam = cam.to_camera({0.0, 0.0, 0.5});
  CHECK(target_cam.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(target_cam.y() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(target_cam.z() == doctest::Approx((Vec3(0.2, -0.1, 0.0) - Vec3(0.0, 0.0, 0.5)).norm()));
}

TEST_CASE("mirror reflection involution") {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 q{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const Vec3 p0{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    Vec3 n{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    if (n.norm() < 1e-3) continue;
    n.normalize();
    const Vec3 twice = reflect_across_plane(reflect_across_plane(q, p0, n), p0, n);
    CHECK((twice - q).norm() < 1e-12);
  }
}

TEST_CASE("virtual image depth matches the hand reflection") {
  // Mirror plane at z=0.4 facing the camera; a side point at (0.1, 0, 0.3)
  // reflects to (0.1, 0, 0.5): optically half a meter away, i.e. behind the
  // plane even though the object is in front of it.
  World world;
  world.objects.push_back(mirror_panel("mirror", {0.0, 0.0, 0.4}, {0.0, 0.0, -1.0}, 0.3));
  world.objects.push_back(point_object("side", {0.1, 0.0, 0.3}, {40, 200, 60}));
  world.target_id = "side";
  CameraState cam;
  Intrinsics intr;

  const auto vis = visible_points(world, cam, intr);
  const VisiblePoint* virt = nullptr;
  const VisiblePoint* real = nullptr;
  for (const auto& vp : vis) {
    if (vp.is_virtual) virt = &vp;
    if (!vp.is_virtual && vp.object_index == 1) real = &vp;
  }
  REQUIRE(virt != nullptr);
  REQUIRE(real != nullptr);
  CHECK(virt->depth == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(virt->p.x == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(virt->p.y == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(virt->through_mirror == 0);
  // The real point is nearer than the glass, so it stays visible too.
  CHECK(real->depth == doctest::Approx(0.3));
}

TEST_CASE("mirror face hides what is behind the glass") {
  World world;
  world.objects.push_back(mirror_panel("mirror", {0.0, 0.0, 0.4}, {0.0, 0.0, -1.0}, 0.3));
  world.objects.push_back(point_object("hidden", {0.0, 0.02, 0.6}, {200, 40, 40}));
  world.target_id = "hidden";
  CameraState cam;
  Intrinsics intr;
  for (const auto& vp : visible_points(world, cam, intr)) {
    CHECK((vp.object_index != 1 || vp.is_virtual));
  }
}

TEST_CASE("translucent sheet keeps the target visible, opaque wall does not") {
  ScenarioConfig cfg;
  cfg.target_id = "target";
  ObjectSpec target;
  target.id = "target";
  target.center = {0.0, 0.0, 0.5};
  target.size = 0.06;
  target.color = {200, 40, 40};
  ObjectSpec sheet;
  sheet.id = "sheet";
  sheet.type = "translucent";
  sheet.center = {0.0, 0.0, 0.1};
  sheet.size = 0.08;
  sheet.alpha = 0.3;
  cfg.objects = {target, sheet};

  World world = make_scene(cfg);
  CameraState cam;
  Intrinsics intr;
  int target_seen = 0;
  for (const auto& vp : visible_points(world, cam, intr)) {
    if (vp.object_index == 0 && !vp.is_virtual) ++target_seen;
  }
  CHECK(target_seen > 100);

  // Same geometry, opaque wall instead: the target emits nothing.
  cfg.objects[1].type = "wall";
  cfg.objects[1].size = 0.15;
  World blocked = make_scene(cfg);
  target_seen = 0;
  for (const auto& vp : visible_points(blocked, cam, intr)) {
    if (vp.object_index == 0 && !vp.is_virtual) ++target_seen;
  }
  CHECK(target_seen == 0);
}

TEST_CASE("ground truth depths, labels and clearance") {
  ScenarioConfig cfg;
  cfg.target_id = "target";
  ObjectSpec target;
  target.id = "target";
  target.center = {0.0, 0.0, 0.5};
  target.size = 0.06;
  target.color = {200, 40, 40};
  ObjectSpec obstacle;
  obstacle.id = "obstacle";
  obstacle.type = "box";
  obstacle.center = {0.12, 0.0, 0.3};
  obstacle.size = 0.04;
  cfg.objects = {target, obstacle};

  const World world = make_scene(cfg);
  CameraState cam;
  Intrinsics intr;
  const GroundTruth gt = ground_truth(world, cam, intr);
  CHECK(gt.z_f == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(gt.target_visible);
  REQUIRE(gt.objects.size() == 1);
  CHECK(gt.objects[0].label == DepthClass::Front);
  CHECK(gt.objects[0].nearest_depth < 0.31);
  // Clearance: nearest obstacle corner to the camera origin.
  CHECK(gt.clearance == doctest::Approx((Vec3(0.12, 0.0, 0.3).norm() - 0.04 * std::sqrt(3.0) / 2.0)).epsilon(0.05));
}

TEST_CASE("fixated point stays centered along a coupled circular arc") {
  // Constant lateral speed with the matching coupled rotation holds the
  // world point on the optical axis; 1 ms integration for 10 s must not let
  // it drift past 1e-4 normalized units.
  const Vec3 target{0.0, 0.0, 0.5};
  World world;
  world.objects.push_back(point_object("t", target, {200, 40, 40}));
  world.target_id = "t";
  CameraState cam;

  const double dt = 1e-3;
  double max_err = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 in_cam = cam.to_camera(target);
    const double d_f = 1.0 / in_cam.z();
    const Vec2 v{0.05, 0.0};
    const Vec2 w = fixation_coupling(v, d_f);
    Twist t;
    t.v = {v.x(), v.y(), 0.0};
    t.w = {w.x(), w.y(), 0.0};
    step(world, cam, t, dt);
    const Vec3 after = cam.to_camera(target);
    max_err = std::max(max_err, std::hypot(after.x() / after.z(), after.y() / after.z()));
  }
  CHECK(max_err < 1e-4);
}

TEST_CASE("trajectories interpolate and clamp") {
  SceneObject o = point_object("m", {0.0, 0.0, 0.5}, {10, 10, 10});
  PoseKeyframe k1;
  k1.t = 1.0;
  k1.position = {0.0, 0.0, 0.5};
  PoseKeyframe k2;
  k2.t = 2.0;
  k2.position = {0.2, 0.0, 0.5};
  o.trajectory = {o.trajectory[0], k1, k2};

  CHECK((o.pose_at(0.5).position - Vec3(0.0, 0.0, 0.5)).norm() < 1e-12);
  CHECK((o.pose_at(1.5).position - Vec3(0.1, 0.0, 0.5)).norm() < 1e-12);
  CHECK((o.pose_at(5.0).position - Vec3(0.2, 0.0, 0.5)).norm() < 1e-12);
}

TEST_CASE("scenario parsing and validation") {
  CHECK_THROWS_AS(parse_scenario("{ not json"), ScenarioError);
  CHECK_THROWS_AS(
      parse_scenario(R"({"target":"a","objects":[{"id":"a","type":"glass"}]})"),
      ScenarioError);
  CHECK_THROWS_AS(
      parse_scenario(R"({"target":"missing","objects":[{"id":"a"}]})"),
      ScenarioError);

  const auto cfg = parse_scenario(R"({
    "seed": 9,
    "target": "red",
    "camera": {"position": [0,0,0], "look_at": [0,0,0.5]},
    "objects": [
      {"id": "red", "type": "card", "center": [0,0,0.5], "size": 0.06,
       "color": [200,40,40]},
      {"id": "m", "type": "mirror", "center": [0.1,0,0.4],
       "normal": [-0.4,0,-1], "size": 0.1}
    ]
  })");
  CHECK(cfg.seed == 9);
  const World w = make_scene(cfg);
  CHECK(w.objects.size() == 2);
  CHECK(w.objects[1].material.kind == MaterialKind::Mirror);
  CHECK(w.target_index() == 0);
}

TEST_CASE("target auto-scale keeps the span in range") {
  // A absurdly small target at 2 m gets bumped to 5% of the image width.
  ScenarioConfig cfg;
  cfg.target_id = "t";
  ObjectSpec t;
  t.id = "t";
  t.center = {0.0, 0.0, 2.0};
  t.size = 1e-4;
  cfg.objects = {t};
  const World w = make_scene(cfg);
  double max_x = 0.0;
  for (const auto& p : w.objects[0].edge_points) {
    max_x = std::max(max_x, std::abs(p.x()));
  }
  const double expected = 0.05 * 2.0 * 2.0 * cfg.intrinsics.tan_half_fov();
  CHECK(2.0 * max_x == doctest::Approx(expected).epsilon(0.01));
}

TEST_SUITE_END();
