#include "gazefix/scenario.hpp"

#include "gazefix/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace gazefix {
namespace {

using nlohmann::json;

Vec3 parse_vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) {
    throw ScenarioError(path + ": expected [x, y, z]");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Rgb parse_rgb(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) {
    throw ScenarioError(path + ": expected [r, g, b]");
  }
  auto ch = [&](int i) {
    const int v = j[i].get<int>();
    if (v < 0 || v > 255) throw ScenarioError(path + ": channel out of [0,255]");
    return static_cast<std::uint8_t>(v);
  };
  return {ch(0), ch(1), ch(2)};
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).template get<T>();
}

void maybe_vec2(const json& j, const char* key, Vec2& out) {
  if (j.contains(key)) {
    const auto& a = j.at(key);
    out = {a[0].get<double>(), a[1].get<double>()};
  }
}

std::vector<PoseKeyframe> parse_trajectory(const json& j, const std::string& path) {
  std::vector<PoseKeyframe> keys;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& k = j[i];
    PoseKeyframe key;
    key.t = k.at("t").get<double>();
    key.position = parse_vec3(k.at("position"), path + "[" + std::to_string(i) + "].position");
    keys.push_back(key);
    if (keys.size() > 1 && keys[keys.size() - 2].t > key.t) {
      throw ScenarioError(path + ": keyframe times must be non-decreasing");
    }
  }
  return keys;
}

ObjectSpec parse_object(const json& j, const std::string& path) {
  ObjectSpec spec;
  spec.id = j.at("id").get<std::string>();
  maybe(j, "type", spec.type);
  if (spec.type != "card" && spec.type != "wall" && spec.type != "box" &&
      spec.type != "mirror" && spec.type != "translucent" && spec.type != "clutter") {
    throw ScenarioError(path + ".type: unknown '" + spec.type + "'");
  }
  if (j.contains("center")) spec.center = parse_vec3(j.at("center"), path + ".center");
  if (j.contains("normal")) spec.normal = parse_vec3(j.at("normal"), path + ".normal");
  maybe(j, "size", spec.size);
  if (spec.size <= 0.0) throw ScenarioError(path + ".size: must be positive");
  if (j.contains("color")) spec.color = parse_rgb(j.at("color"), path + ".color");
  maybe(j, "alpha", spec.alpha);
  if (spec.type == "translucent" && (spec.alpha <= 0.0 || spec.alpha >= 1.0)) {
    throw ScenarioError(path + ".alpha: must be in (0,1)");
  }
  maybe(j, "count", spec.count);
  if (j.contains("extent")) spec.extent = parse_vec3(j.at("extent"), path + ".extent");
  if (j.contains("trajectory")) {
    spec.trajectory = parse_trajectory(j.at("trajectory"), path + ".trajectory");
  }
  return spec;
}

// Evenly spaced points along the perimeter of a size x size square in the
// z=0 object plane.
void add_outline(std::vector<Vec3>& pts, double size, int per_edge) {
  const double h = 0.5 * size;
  for (int i = 0; i < per_edge; ++i) {
    const double s = -h + size * i / per_edge;
    pts.push_back({s, -h, 0.0});
    pts.push_back({h, s, 0.0});
    pts.push_back({-s, h, 0.0});
    pts.push_back({-h, -s, 0.0});
  }
}

void add_fill(std::vector<Vec3>& pts, double size, int n) {
  const double h = 0.5 * size;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      pts.push_back({-h + size * (i + 0.5) / n, -h + size * (j + 0.5) / n, 0.0});
    }
  }
}

void add_box_edges(std::vector<Vec3>& pts, double size, int per_edge) {
  const double h = 0.5 * size;
  const double c[2] = {-h, h};
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int i = 0; i <= per_edge; ++i) {
        const double s = -h + size * i / per_edge;
        pts.push_back({s, c[a], c[b]});
        pts.push_back({c[a], s, c[b]});
        pts.push_back({c[a], c[b], s});
      }
    }
  }
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("scenario parse error: ") + e.what());
  }
  try {
    ScenarioConfig cfg;
    maybe(j, "seed", cfg.seed);
    maybe(j, "duration", cfg.duration);
    maybe(j, "control_rate", cfg.control_rate);
    maybe(j, "perception_rate", cfg.perception_rate);
    if (j.contains("image")) {
      const auto& im = j.at("image");
      maybe(im, "width", cfg.intrinsics.width);
      maybe(im, "height", cfg.intrinsics.height);
      double half_fov_deg = cfg.intrinsics.half_fov * 180.0 / kPi;
      maybe(im, "half_fov_deg", half_fov_deg);
      cfg.intrinsics.half_fov = half_fov_deg * kPi / 180.0;
      if (!cfg.intrinsics.valid()) throw ScenarioError("image: invalid intrinsics");
    }
    if (j.contains("camera")) {
      const auto& cam = j.at("camera");
      if (cam.contains("position")) {
        cfg.camera_position = parse_vec3(cam.at("position"), "camera.position");
      }
      if (cam.contains("look_at")) {
        cfg.camera_look_at = parse_vec3(cam.at("look_at"), "camera.look_at");
      }
    }
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      maybe(n, "sigma_v", cfg.sigma_v);
      maybe(n, "sigma_w", cfg.sigma_w);
      maybe(n, "pixel", cfg.pixel_noise);
    }
    maybe(j, "mask_tolerance", cfg.mask_tolerance);
    maybe(j, "edge_samples", cfg.edge_samples);
    maybe(j, "classify_eps", cfg.classify_eps);
    if (j.contains("gains")) {
      const auto& g = j.at("gains");
      maybe(g, "lambda_xy", cfg.gains.lambda_xy);
      maybe(g, "lambda_z", cfg.gains.lambda_z);
      maybe_vec2(g, "lambda_dist", cfg.gains.lambda_dist);
      maybe_vec2(g, "lambda_cycle", cfg.gains.lambda_cycle);
      maybe(g, "cycle_omega", cfg.gains.cycle_omega);
      maybe(g, "lambda_obs", cfg.gains.lambda_obs);
      maybe(g, "z_desired", cfg.gains.z_desired);
      maybe(g, "max_linear", cfg.gains.max_linear);
      maybe(g, "max_angular", cfg.gains.max_angular);
      maybe(g, "approach_ratio", cfg.gains.approach_ratio);
      maybe(g, "grasp_tol_z", cfg.gains.grasp_tol_z);
      maybe(g, "grasp_sigma_max", cfg.gains.grasp_sigma_max);
      maybe(g, "grasp_dwell", cfg.gains.grasp_dwell);
    }
    if (j.contains("ekf")) {
      const auto& e = j.at("ekf");
      maybe(e, "q_accel", cfg.ekf.q_accel);
      maybe(e, "q_df", cfg.ekf.q_df);
      maybe(e, "r_flow", cfg.ekf.r_flow);
      maybe(e, "innovation_gate", cfg.ekf.innovation_gate);
      maybe(e, "inflation", cfg.ekf.inflation);
    }
    cfg.target_id = j.at("target").get<std::string>();
    const auto& objs = j.at("objects");
    for (std::size_t i = 0; i < objs.size(); ++i) {
      cfg.objects.push_back(
          parse_object(objs[i], "objects[" + std::to_string(i) + "]"));
    }
    bool found = false;
    for (const auto& o : cfg.objects) found |= o.id == cfg.target_id;
    if (!found) throw ScenarioError("target: no object with id '" + cfg.target_id + "'");
    return cfg;
  } catch (const json::exception& e) {
    throw ScenarioError(std::string("scenario: ") + e.what());
  }
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

World make_scene(const ScenarioConfig& cfg) {
  World world;
  world.target_id = cfg.target_id;
  Rng clutter_rng(Rng::mix(cfg.seed, 0xC1077E8));

  for (const auto& spec : cfg.objects) {
    SceneObject obj;
    obj.id = spec.id;
    obj.color = spec.color;

    double size = spec.size;
    if (spec.id == cfg.target_id) {
      // Keep the target between 5% and 75% of the image width at its
      // starting distance; sizes outside that range are unusable for
      // detection or flow.
      const double dist = (spec.center - cfg.camera_position).norm();
      const double full_width = 2.0 * dist * cfg.intrinsics.tan_half_fov();
      size = std::clamp(size, 0.05 * full_width, 0.75 * full_width);
    }

    const Eigen::Quaterniond rot =
        Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), spec.normal.normalized());
    PoseKeyframe base;
    base.t = 0.0;
    base.position = spec.center;
    base.rotation = rot;
    obj.trajectory.push_back(base);
    for (const auto& k : spec.trajectory) {
      PoseKeyframe key = k;
      key.rotation = rot;
      obj.trajectory.push_back(key);
    }

    if (spec.type == "card" || spec.type == "wall") {
      add_outline(obj.edge_points, size, spec.type == "wall" ? 32 : 20);
      obj.point_colors.assign(obj.edge_points.size(), obj.color);
      const int n = spec.type == "wall" ? 30 : 20;
      // Two-tone checker fill: printed objects carry texture, and the flow
      // solver needs 2D gradient structure away from the outline.
      const std::size_t fill_start = obj.edge_points.size();
      add_fill(obj.edge_points, size * 0.94, n);
      auto tint = [](Rgb c, int delta) {
        auto ch = [&](int v) {
          return static_cast<std::uint8_t>(std::clamp(v + delta, 0, 255));
        };
        return Rgb{ch(c.r), ch(c.g), ch(c.b)};
      };
      for (std::size_t k = fill_start; k < obj.edge_points.size(); ++k) {
        const std::size_t f = k - fill_start;
        const bool odd = ((f % n) + (f / n)) % 2 != 0;
        obj.point_colors.push_back(tint(obj.color, odd ? 12 : -12));
      }
      obj.occluding_face = true;
    } else if (spec.type == "box") {
      add_box_edges(obj.edge_points, size, 14);
    } else if (spec.type == "mirror") {
      add_outline(obj.edge_points, size, 24);
      obj.material.kind = MaterialKind::Mirror;
      obj.material.mirror_point = Vec3::Zero();
      obj.material.mirror_normal = Vec3::UnitZ();
      obj.occluding_face = true;
    } else if (spec.type == "translucent") {
      add_outline(obj.edge_points, size, 20);
      add_fill(obj.edge_points, size * 0.94, 16);
      obj.material.kind = MaterialKind::Translucent;
      obj.material.alpha = spec.alpha;
    } else if (spec.type == "clutter") {
      for (int i = 0; i < spec.count; ++i) {
        obj.edge_points.push_back(
            {clutter_rng.uniform(-0.5, 0.5) * spec.extent.x(),
             clutter_rng.uniform(-0.5, 0.5) * spec.extent.y(),
             clutter_rng.uniform(-0.5, 0.5) * spec.extent.z()});
      }
      obj.counts_for_clearance = false;
    }
    obj.face_point = Vec3::Zero();
    obj.face_normal = Vec3::UnitZ();
    if (obj.edge_points.empty()) {
      throw ScenarioError("object '" + spec.id + "': no points");
    }
    world.objects.push_back(std::move(obj));
  }
  return world;
}

ColorMask target_mask(const ScenarioConfig& cfg) {
  for (const auto& o : cfg.objects) {
    if (o.id == cfg.target_id) {
      return {o.color, cfg.mask_tolerance};
    }
  }
  throw ScenarioError("target object not found");
}

}  // namespace gazefix
