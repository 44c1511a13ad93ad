// RGB frame container and binary PPM (P6) export.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gazefix {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

struct Frame {
  int width = 0;
  int height = 0;
  double timestamp = 0.0;              // seconds
  std::vector<std::uint8_t> pixels;    // row-major RGB

  Frame() = default;
  Frame(int w, int h, Rgb fill = {}, double t = 0.0);

  std::size_t index(int x, int y) const {
    return 3 * (static_cast<std::size_t>(y) * width + x);
  }
  Rgb get(int x, int y) const {
    const std::size_t i = index(x, y);
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    const std::size_t i = index(x, y);
    pixels[i] = c.r;
    pixels[i + 1] = c.g;
    pixels[i + 2] = c.b;
  }
  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }
  // Grayscale luminance in [0, 255]: (r + g + b) / 3.
  double luminance(int x, int y) const {
    const std::size_t i = index(x, y);
    return (pixels[i] + pixels[i + 1] + pixels[i + 2]) / 3.0;
  }
};

void write_ppm(const Frame& frame, const std::string& path);

}  // namespace gazefix
