// Scenario files: JSON documents describing the scene (parametric objects
// with poses, materials and trajectories), camera start pose, gains, noise
// levels, rates and seed. make_scene materializes them into point-cloud
// worlds; the target is auto-scaled to span a sane fraction of the image at
// its starting distance.

#pragma once

#include "gazefix/control.hpp"
#include "gazefix/estimation.hpp"
#include "gazefix/simworld.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace gazefix {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ObjectSpec {
  std::string id;
  std::string type = "card";  // card | wall | box | mirror | translucent | clutter
  Vec3 center{0.0, 0.0, 0.5};
  Vec3 normal{0.0, 0.0, -1.0};  // panel facing direction
  double size = 0.06;           // m, panel edge / box edge
  Rgb color{180, 180, 180};
  double alpha = 0.3;  // translucent only
  int count = 200;     // clutter only
  Vec3 extent{1.0, 1.0, 0.4};  // clutter box
  std::vector<PoseKeyframe> trajectory;  // absolute poses; empty = static
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  double duration = 20.0;
  double control_rate = 1000.0;    // Hz
  double perception_rate = 25.0;   // Hz
  Intrinsics intrinsics;
  Vec3 camera_position{0.0, 0.0, 0.0};
  Vec3 camera_look_at{0.0, 0.0, 0.5};
  double sigma_v = 1e-3;   // odometry noise, m/s
  double sigma_w = 1e-3;   // rad/s
  double pixel_noise = 2.0 / 255.0;
  int mask_tolerance = 60;
  int edge_samples = 30;
  double classify_eps = 0.03;  // flow dead-band for obstacle/depth labeling
  Gains gains;
  EkfConfig ekf;
  std::string target_id;
  std::vector<ObjectSpec> objects;
};

ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario(const std::string& path);

World make_scene(const ScenarioConfig& cfg);

ColorMask target_mask(const ScenarioConfig& cfg);

}  // namespace gazefix
