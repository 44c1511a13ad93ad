#include "gazefix/image.hpp"

#include <cstdio>
#include <stdexcept>

namespace gazefix {

Frame::Frame(int w, int h, Rgb fill, double t)
    : width(w), height(h), timestamp(t),
      pixels(3 * static_cast<std::size_t>(w) * h) {
  for (std::size_t i = 0; i < pixels.size(); i += 3) {
    pixels[i] = fill.r;
    pixels[i + 1] = fill.g;
    pixels[i + 2] = fill.b;
  }
}

void write_ppm(const Frame& frame, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  std::fprintf(f, "P6\n%d %d\n255\n", frame.width, frame.height);
  std::fwrite(frame.pixels.data(), 1, frame.pixels.size(), f);
  std::fclose(f);
}

}  // namespace gazefix
