// Perceptual front end: synthetic rendering of the scene into RGB frames,
// color-blob detection and edge sampling of the target, and optic flow from
// spatiotemporal gradients. The renderer and the flow solver are the hot
// per-pixel/per-point kernels: both run OpenMP-parallel and keep serial
// reference twins that produce byte-identical output.

#pragma once

#include "gazefix/geometry.hpp"
#include "gazefix/image.hpp"
#include "gazefix/rng.hpp"
#include "gazefix/simworld.hpp"

#include <optional>
#include <span>
#include <vector>

namespace gazefix {

struct RenderOptions {
  double splat_radius_px = 2.0;
  double noise_sigma = 2.0 / 255.0;  // luminance noise, fraction of full scale
  std::uint64_t noise_seed = 0;
  Rgb background{28, 28, 28};
};

Frame render(const World& world, const CameraState& cam, const Intrinsics& intr,
             const RenderOptions& opts = {});
// Serial reference; must match render() byte for byte.
Frame render_reference(const World& world, const CameraState& cam,
                       const Intrinsics& intr, const RenderOptions& opts = {});

struct ColorMask {
  Rgb target_rgb;
  int tolerance = 60;  // max per-channel distance

  bool matches(Rgb c) const {
    return std::abs(int(c.r) - int(target_rgb.r)) <= tolerance &&
           std::abs(int(c.g) - int(target_rgb.g)) <= tolerance &&
           std::abs(int(c.b) - int(target_rgb.b)) <= tolerance;
  }
};

// Centroid of mask-matching pixels in normalized coordinates; empty when
// fewer than min_pixels match (target not in view).
std::optional<ImagePoint> color_centroid(const Frame& frame, const ColorMask& mask,
                                         const Intrinsics& intr,
                                         int min_pixels = 10);

// Uniform seeded draw from the mask boundary (masked pixel with an unmasked
// 4-neighbor). Returns fewer than n when the boundary is smaller; empty when
// the mask is empty.
std::vector<ImagePoint> sample_edge_points(const Frame& frame, const ColorMask& mask,
                                           const Intrinsics& intr, int n, Rng& rng);

struct FlowSample {
  ImagePoint p;
  Vec2 flow = Vec2::Zero();  // normalized units per second
  double confidence = 0.0;
  bool valid = false;
};

struct FlowConfig {
  int window = 7;           // odd; local least-squares footprint
  int iterations = 3;       // warp refinement steps
  double min_eigenvalue = 250.0;   // structure tensor floor (luminance^2 units)
  double condition_limit = 1e3;
  double confidence_scale = 1000.0;
};

// Brightness-constancy least squares per query point between two frames.
// Throws std::invalid_argument on frame size mismatch or non-positive dt.
std::vector<FlowSample> gradient_flow(const Frame& prev, const Frame& next,
                                      std::span<const ImagePoint> at,
                                      const Intrinsics& intr,
                                      const FlowConfig& cfg = {});
std::vector<FlowSample> gradient_flow_reference(const Frame& prev, const Frame& next,
                                                std::span<const ImagePoint> at,
                                                const Intrinsics& intr,
                                                const FlowConfig& cfg = {});

// Exact flow at the queried points from ground-truth scene depth and the
// camera twist (plus scripted object motion). Samples that hit no scene
// content come back invalid.
std::vector<FlowSample> analytic_flow(const World& world, const CameraState& cam,
                                      const Intrinsics& intr, const Twist& twist,
                                      std::span<const ImagePoint> at);

// Pixel-center grid over the image interior, normalized coordinates.
std::vector<ImagePoint> image_grid_points(const Intrinsics& intr, int stride,
                                          int margin = 6);

// Direction-as-hue, magnitude-as-saturation flow image; invalid samples stay
// dark. Samples are assumed to lie on the stride grid used to produce them.
Frame flow_visualization(std::span<const FlowSample> samples, const Intrinsics& intr,
                         int stride, double magnitude_scale = 0.0);

}  // namespace gazefix
