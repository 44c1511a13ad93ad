#include "gazefix/optics.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gazefix {
namespace {

constexpr int kTile = 16;

struct Splat {
  float depth;
  Rgb color;
  float alpha;
  float cx, cy;  // pixel coords of the center
};

struct SplatLists {
  std::vector<Splat> opaque;       // candidate order
  std::vector<Splat> translucent;  // far-to-near
};

SplatLists gather_splats(const World& world, const CameraState& cam,
                         const Intrinsics& intr, const RenderOptions& opts) {
  SplatLists lists;
  const auto vis = visible_points(world, cam, intr, opts.splat_radius_px);
  lists.opaque.reserve(vis.size());
  for (const auto& vp : vis) {
    const Vec2 px = to_pixel(vp.p, intr);
    Splat s{static_cast<float>(vp.depth), vp.color,
            static_cast<float>(vp.alpha), static_cast<float>(px.x()),
            static_cast<float>(px.y())};
    if (vp.material == MaterialKind::Translucent) {
      lists.translucent.push_back(s);
    } else {
      lists.opaque.push_back(s);
    }
  }
  std::stable_sort(lists.translucent.begin(), lists.translucent.end(),
                   [](const Splat& a, const Splat& b) { return a.depth > b.depth; });
  return lists;
}

// Shades one pixel against every splat that covers it, in list order; this
// fixed order is what keeps the tiled parallel pass bit-identical to the
// serial reference.
struct PixelShader {
  const SplatLists& lists;
  double radius_sq;

  void shade(int x, int y, std::span<const int> opaque_idx,
             std::span<const int> trans_idx, float& z, float rgb[3]) const {
    const double px = x + 0.5, py = y + 0.5;
    for (int i : opaque_idx) {
      const Splat& s = lists.opaque[i];
      const double dx = px - s.cx, dy = py - s.cy;
      if (dx * dx + dy * dy > radius_sq) continue;
      if (s.depth < z) {
        z = s.depth;
        rgb[0] = s.color.r;
        rgb[1] = s.color.g;
        rgb[2] = s.color.b;
      }
    }
    for (int i : trans_idx) {
      const Splat& s = lists.translucent[i];
      const double dx = px - s.cx, dy = py - s.cy;
      if (dx * dx + dy * dy > radius_sq) continue;
      if (s.depth < z) {
        rgb[0] = s.alpha * s.color.r + (1.0f - s.alpha) * rgb[0];
        rgb[1] = s.alpha * s.color.g + (1.0f - s.alpha) * rgb[1];
        rgb[2] = s.alpha * s.color.b + (1.0f - s.alpha) * rgb[2];
      }
    }
  }
};

Frame finalize(int w, int h, double t, const std::vector<float>& rgb,
               const RenderOptions& opts) {
  Frame frame(w, h, opts.background, t);
  const double sigma = opts.noise_sigma * 255.0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
    const double noise =
        sigma > 0.0 ? sigma * hash_gaussian(Rng::mix(opts.noise_seed, i)) : 0.0;
    for (int c = 0; c < 3; ++c) {
      const double v = rgb[3 * i + c] + noise;
      frame.pixels[3 * i + c] =
          static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
  }
  return frame;
}

Frame render_impl(const World& world, const CameraState& cam,
                  const Intrinsics& intr, const RenderOptions& opts,
                  bool parallel) {
  const int w = intr.width, h = intr.height;
  const auto lists = gather_splats(world, cam, intr, opts);
  const double r = opts.splat_radius_px + 0.71;  // pixel-center slack
  const PixelShader shader{lists, r * r};

  std::vector<float> rgb(3 * static_cast<std::size_t>(w) * h);
  std::vector<float> zbuf(static_cast<std::size_t>(w) * h,
                          std::numeric_limits<float>::infinity());
  for (std::size_t i = 0; i < zbuf.size(); ++i) {
    rgb[3 * i] = opts.background.r;
    rgb[3 * i + 1] = opts.background.g;
    rgb[3 * i + 2] = opts.background.b;
  }

  if (!parallel) {
    std::vector<int> all_opaque(lists.opaque.size());
    std::iota(all_opaque.begin(), all_opaque.end(), 0);
    std::vector<int> all_trans(lists.translucent.size());
    std::iota(all_trans.begin(), all_trans.end(), 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        shader.shade(x, y, all_opaque, all_trans, zbuf[i], &rgb[3 * i]);
      }
    }
    return finalize(w, h, world.time, rgb, opts);
  }

  // Bin splats into tiles (serial, preserves order), then shade tiles
  // independently.
  const int tiles_x = (w + kTile - 1) / kTile;
  const int tiles_y = (h + kTile - 1) / kTile;
  std::vector<std::vector<int>> tile_opaque(tiles_x * tiles_y);
  std::vector<std::vector<int>> tile_trans(tiles_x * tiles_y);
  auto bin = [&](const std::vector<Splat>& splats,
                 std::vector<std::vector<int>>& tiles) {
    for (int i = 0; i < static_cast<int>(splats.size()); ++i) {
      const Splat& s = splats[i];
      const int tx0 = std::clamp(static_cast<int>((s.cx - r) / kTile), 0, tiles_x - 1);
      const int tx1 = std::clamp(static_cast<int>((s.cx + r) / kTile), 0, tiles_x - 1);
      const int ty0 = std::clamp(static_cast<int>((s.cy - r) / kTile), 0, tiles_y - 1);
      const int ty1 = std::clamp(static_cast<int>((s.cy + r) / kTile), 0, tiles_y - 1);
      for (int ty = ty0; ty <= ty1; ++ty) {
        for (int tx = tx0; tx <= tx1; ++tx) {
          tiles[ty * tiles_x + tx].push_back(i);
        }
      }
    }
  };
  bin(lists.opaque, tile_opaque);
  bin(lists.translucent, tile_trans);

#pragma omp parallel for schedule(dynamic)
  for (int tile = 0; tile < tiles_x * tiles_y; ++tile) {
    const int tx = tile % tiles_x, ty = tile / tiles_x;
    const auto& ops = tile_opaque[tile];
    const auto& trs = tile_trans[tile];
    if (ops.empty() && trs.empty()) continue;
    const int x1 = std::min(w, (tx + 1) * kTile);
    const int y1 = std::min(h, (ty + 1) * kTile);
    for (int y = ty * kTile; y < y1; ++y) {
      for (int x = tx * kTile; x < x1; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        shader.shade(x, y, ops, trs, zbuf[i], &rgb[3 * i]);
      }
    }
  }
  return finalize(w, h, world.time, rgb, opts);
}

double luminance_at(const Frame& f, int x, int y) { return f.luminance(x, y); }

// Bilinear luminance sample, clamped to the image border.
double sample_bilinear(const std::vector<float>& lum, int w, int h, double x,
                       double y) {
  x = std::clamp(x, 0.0, w - 1.001);
  y = std::clamp(y, 0.0, h - 1.001);
  const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
  const double fx = x - x0, fy = y - y0;
  const auto at = [&](int xx, int yy) {
    return static_cast<double>(lum[static_cast<std::size_t>(yy) * w + xx]);
  };
  return (1 - fx) * (1 - fy) * at(x0, y0) + fx * (1 - fy) * at(x0 + 1, y0) +
         (1 - fx) * fy * at(x0, y0 + 1) + fx * fy * at(x0 + 1, y0 + 1);
}

std::vector<float> to_luminance(const Frame& f) {
  std::vector<float> lum(static_cast<std::size_t>(f.width) * f.height);
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width; ++x) {
      lum[static_cast<std::size_t>(y) * f.width + x] =
          static_cast<float>(luminance_at(f, x, y));
    }
  }
  return lum;
}

FlowSample solve_flow_at(const std::vector<float>& prev_lum,
                         const std::vector<float>& next_lum, int w, int h,
                         const ImagePoint& p, double dt, const Intrinsics& intr,
                         const FlowConfig& cfg) {
  FlowSample out;
  out.p = p;
  const Vec2 px = to_pixel(p, intr);
  const int half = cfg.window / 2;
  const int cx = static_cast<int>(std::lround(px.x() - 0.5));
  const int cy = static_cast<int>(std::lround(px.y() - 0.5));
  if (cx - half < 1 || cx + half >= w - 1 || cy - half < 1 || cy + half >= h - 1) {
    return out;
  }

  // Template gradients from the previous frame; fixed across iterations.
  double gxx = 0, gxy = 0, gyy = 0;
  const auto at_prev = [&](int x, int y) {
    return static_cast<double>(prev_lum[static_cast<std::size_t>(y) * w + x]);
  };
  std::vector<double> ix_buf(cfg.window * cfg.window), iy_buf(cfg.window * cfg.window);
  for (int j = -half; j <= half; ++j) {
    for (int i = -half; i <= half; ++i) {
      const int x = cx + i, y = cy + j;
      const double ix = 0.5 * (at_prev(x + 1, y) - at_prev(x - 1, y));
      const double iy = 0.5 * (at_prev(x, y + 1) - at_prev(x, y - 1));
      ix_buf[(j + half) * cfg.window + (i + half)] = ix;
      iy_buf[(j + half) * cfg.window + (i + half)] = iy;
      gxx += ix * ix;
      gxy += ix * iy;
      gyy += iy * iy;
    }
  }
  const double tr = gxx + gyy;
  const double det = gxx * gyy - gxy * gxy;
  const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
  const double lmin = 0.5 * tr - disc;
  const double lmax = 0.5 * tr + disc;
  // Aperture problem: a near-singular tensor means only the normal component
  // is observable; those samples are dropped rather than half-trusted.
  if (lmin < cfg.min_eigenvalue || lmax > cfg.condition_limit * std::max(lmin, 1e-12)) {
    return out;
  }

  Vec2 u = Vec2::Zero();  // pixel displacement prev -> next
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    double bx = 0, by = 0;
    for (int j = -half; j <= half; ++j) {
      for (int i = -half; i <= half; ++i) {
        const int x = cx + i, y = cy + j;
        const double warped =
            sample_bilinear(next_lum, w, h, x + u.x(), y + u.y());
        const double it = warped - at_prev(x, y);
        bx += ix_buf[(j + half) * cfg.window + (i + half)] * it;
        by += iy_buf[(j + half) * cfg.window + (i + half)] * it;
      }
    }
    u.x() -= (gyy * bx - gxy * by) / det;
    u.y() -= (gxx * by - gxy * bx) / det;
  }

  out.flow = u / (dt * intr.focal_px());
  out.confidence = lmin / (lmin + cfg.confidence_scale);
  out.valid = true;
  return out;
}

std::vector<FlowSample> gradient_flow_impl(const Frame& prev, const Frame& next,
                                           std::span<const ImagePoint> at,
                                           const Intrinsics& intr,
                                           const FlowConfig& cfg, bool parallel) {
  if (prev.width != next.width || prev.height != next.height) {
    throw std::invalid_argument("gradient_flow: frame size mismatch");
  }
  const double dt = next.timestamp - prev.timestamp;
  if (!(dt > 0.0)) {
    throw std::invalid_argument("gradient_flow: non-positive dt");
  }
  const auto prev_lum = to_luminance(prev);
  const auto next_lum = to_luminance(next);
  std::vector<FlowSample> out(at.size());
  const int n = static_cast<int>(at.size());
#pragma omp parallel for schedule(static) if (parallel)
  for (int i = 0; i < n; ++i) {
    out[i] = solve_flow_at(prev_lum, next_lum, prev.width, prev.height, at[i],
                           dt, intr, cfg);
  }
  return out;
}

void hsv_to_rgb(double hue, double sat, double val, Rgb& out) {
  hue = std::fmod(hue < 0 ? hue + 2.0 * kPi : hue, 2.0 * kPi) * 3.0 / kPi;  // [0,6)
  const int i = static_cast<int>(hue);
  const double f = hue - i;
  const double p = val * (1 - sat);
  const double q = val * (1 - sat * f);
  const double t = val * (1 - sat * (1 - f));
  double r = 0, g = 0, b = 0;
  switch (i % 6) {
    case 0: r = val; g = t; b = p; break;
    case 1: r = q; g = val; b = p; break;
    case 2: r = p; g = val; b = t; break;
    case 3: r = p; g = q; b = val; break;
    case 4: r = t; g = p; b = val; break;
    case 5: r = val; g = p; b = q; break;
  }
  out = {static_cast<std::uint8_t>(std::lround(255 * r)),
         static_cast<std::uint8_t>(std::lround(255 * g)),
         static_cast<std::uint8_t>(std::lround(255 * b))};
}

}  // namespace

Frame render(const World& world, const CameraState& cam, const Intrinsics& intr,
             const RenderOptions& opts) {
  return render_impl(world, cam, intr, opts, true);
}

Frame render_reference(const World& world, const CameraState& cam,
                       const Intrinsics& intr, const RenderOptions& opts) {
  return render_impl(world, cam, intr, opts, false);
}

std::optional<ImagePoint> color_centroid(const Frame& frame, const ColorMask& mask,
                                         const Intrinsics& intr, int min_pixels) {
  double sx = 0, sy = 0;
  long count = 0;
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      if (mask.matches(frame.get(x, y))) {
        sx += x + 0.5;
        sy += y + 0.5;
        ++count;
      }
    }
  }
  if (count < min_pixels) return std::nullopt;
  return from_pixel(sx / count, sy / count, intr);
}

std::vector<ImagePoint> sample_edge_points(const Frame& frame, const ColorMask& mask,
                                           const Intrinsics& intr, int n, Rng& rng) {
  const int w = frame.width, h = frame.height;
  std::vector<std::uint8_t> m(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      m[static_cast<std::size_t>(y) * w + x] = mask.matches(frame.get(x, y));
    }
  }
  const auto masked = [&](int x, int y) {
    return x >= 0 && x < w && y >= 0 && y < h &&
           m[static_cast<std::size_t>(y) * w + x];
  };
  std::vector<std::pair<int, int>> boundary;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!masked(x, y)) continue;
      if (!masked(x - 1, y) || !masked(x + 1, y) || !masked(x, y - 1) ||
          !masked(x, y + 1)) {
        boundary.emplace_back(x, y);
      }
    }
  }
  // Partial Fisher-Yates: the first k slots become the sample.
  const int k = std::min<int>(n, static_cast<int>(boundary.size()));
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.bounded(
                          static_cast<std::uint32_t>(boundary.size() - i)));
    std::swap(boundary[i], boundary[j]);
  }
  std::vector<ImagePoint> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) {
    out.push_back(from_pixel(boundary[i].first + 0.5, boundary[i].second + 0.5, intr));
  }
  return out;
}

std::vector<FlowSample> gradient_flow(const Frame& prev, const Frame& next,
                                      std::span<const ImagePoint> at,
                                      const Intrinsics& intr, const FlowConfig& cfg) {
  return gradient_flow_impl(prev, next, at, intr, cfg, true);
}

std::vector<FlowSample> gradient_flow_reference(const Frame& prev, const Frame& next,
                                                std::span<const ImagePoint> at,
                                                const Intrinsics& intr,
                                                const FlowConfig& cfg) {
  return gradient_flow_impl(prev, next, at, intr, cfg, false);
}

std::vector<FlowSample> analytic_flow(const World& world, const CameraState& cam,
                                      const Intrinsics& intr, const Twist& twist,
                                      std::span<const ImagePoint> at) {
  const auto vis = visible_points(world, cam, intr);
  const double accept_px = 3.5;
  std::vector<FlowSample> out(at.size());
  for (std::size_t i = 0; i < at.size(); ++i) {
    out[i].p = at[i];
    const Vec2 q = to_pixel(at[i], intr);
    double best = accept_px * accept_px;
    const VisiblePoint* hit = nullptr;
    for (const auto& vp : vis) {
      const Vec2 d = to_pixel(vp.p, intr) - q;
      const double dist = d.squaredNorm();
      if (dist < best) {
        best = dist;
        hit = &vp;
      }
    }
    if (!hit) continue;  // background: no scene content at this sample
    const double d = 1.0 / hit->depth;
    Vec2 flow = image_velocity(at[i], d, twist);
    const Vec3 u = cam.rot_wc * hit->world_velocity;
    flow.x() += d * (u.x() - at[i].x * u.z());
    flow.y() += d * (u.y() - at[i].y * u.z());
    out[i].flow = flow;
    out[i].confidence = 1.0;
    out[i].valid = true;
  }
  return out;
}

std::vector<ImagePoint> image_grid_points(const Intrinsics& intr, int stride,
                                          int margin) {
  std::vector<ImagePoint> out;
  for (int y = margin; y < intr.height - margin; y += stride) {
    for (int x = margin; x < intr.width - margin; x += stride) {
      out.push_back(from_pixel(x + 0.5, y + 0.5, intr));
    }
  }
  return out;
}

Frame flow_visualization(std::span<const FlowSample> samples, const Intrinsics& intr,
                         int stride, double magnitude_scale) {
  Frame img(intr.width, intr.height, {20, 20, 20});
  double scale = magnitude_scale;
  if (scale <= 0.0) {
    std::vector<double> mags;
    for (const auto& s : samples) {
      if (s.valid) mags.push_back(s.flow.norm());
    }
    if (!mags.empty()) {
      std::sort(mags.begin(), mags.end());
      scale = mags[static_cast<std::size_t>(0.95 * (mags.size() - 1))];
    }
    if (scale <= 1e-12) scale = 1.0;
  }
  const int half = std::max(1, stride / 2 + 1);
  for (const auto& s : samples) {
    Rgb c{40, 40, 40};
    if (s.valid) {
      const double mag = std::min(1.0, s.flow.norm() / scale);
      hsv_to_rgb(std::atan2(s.flow.y(), s.flow.x()), mag, 0.25 + 0.75 * mag, c);
    }
    const Vec2 px = to_pixel(s.p, intr);
    const int cx = static_cast<int>(std::lround(px.x() - 0.5));
    const int cy = static_cast<int>(std::lround(px.y() - 0.5));
    for (int y = cy - half + 1; y < cy + half; ++y) {
      for (int x = cx - half + 1; x < cx + half; ++x) {
        if (img.in_bounds(x, y)) img.set(x, y, c);
      }
    }
  }
  return img;
}

}  // namespace gazefix
