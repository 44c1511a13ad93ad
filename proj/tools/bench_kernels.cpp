// Timing comparison of the OpenMP kernels against their serial references:
// scene rendering and per-point gradient flow, on a clutter-heavy scene.

#include "gazefix/commands.hpp"
#include "gazefix/optics.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>

using namespace gazefix;
using clock_type = std::chrono::steady_clock;

namespace {

template <typename F>
double time_ms(F&& fn, int reps) {
  const auto t0 = clock_type::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = clock_type::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main() {
  ScenarioConfig cfg = distance_eval_scenario(0.5, 11, 0.0, 0.0);
  cfg.intrinsics.width = 256;
  cfg.intrinsics.height = 256;
  ObjectSpec clutter;
  clutter.id = "clutter";
  clutter.type = "clutter";
  clutter.center = {0.0, 0.0, 0.9};
  clutter.extent = {1.2, 1.2, 0.8};
  clutter.count = 4000;
  cfg.objects.push_back(clutter);

  const World world = make_scene(cfg);
  const CameraState cam =
      CameraState::looking_at(cfg.camera_position, cfg.camera_look_at);
  RenderOptions ropts;

  const int reps = 20;
  std::printf("threads: %d, image %dx%d, %d reps\n", omp_get_max_threads(),
              cfg.intrinsics.width, cfg.intrinsics.height, reps);

  const double render_par = time_ms(
      [&] { (void)render(world, cam, cfg.intrinsics, ropts); }, reps);
  const double render_ser = time_ms(
      [&] { (void)render_reference(world, cam, cfg.intrinsics, ropts); }, reps);
  std::printf("render          serial %8.3f ms   parallel %8.3f ms   speedup %.2fx\n",
              render_ser, render_par, render_ser / render_par);

  const Frame a = render(world, cam, cfg.intrinsics, ropts);
  World world2 = world;
  CameraState cam2 = cam;
  Twist twist;
  twist.v = {0.05, 0.02, 0.0};
  const Vec2 w_fix = fixation_coupling({0.05, 0.02}, 2.0);
  twist.w = {w_fix.x(), w_fix.y(), 0.0};
  for (int i = 0; i < 40; ++i) step(world2, cam2, twist, 1e-3);
  RenderOptions r2 = ropts;
  r2.noise_seed = 1;
  const Frame b = render(world2, cam2, cfg.intrinsics, r2);

  const auto grid = image_grid_points(cfg.intrinsics, 2);
  std::printf("flow points: %zu\n", grid.size());
  const double flow_par = time_ms(
      [&] { (void)gradient_flow(a, b, grid, cfg.intrinsics); }, reps);
  const double flow_ser = time_ms(
      [&] { (void)gradient_flow_reference(a, b, grid, cfg.intrinsics); }, reps);
  std::printf("gradient_flow   serial %8.3f ms   parallel %8.3f ms   speedup %.2fx\n",
              flow_ser, flow_par, flow_ser / flow_par);
  return 0;
}
