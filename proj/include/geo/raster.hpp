#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "geo/error.hpp"
#include "geo/program.hpp"

namespace geo {

// Row-major 8-bit RGB image.
class Raster {
public:
  Raster() = default;
  Raster(int width, int height, Rgb fill = {255, 255, 255})
      : width_(width), height_(height),
        pixels_(static_cast<std::size_t>(checked(width, height)) * 3) {
    for (std::size_t i = 0; i < pixels_.size(); i += 3) {
      pixels_[i] = fill.r;
      pixels_[i + 1] = fill.g;
      pixels_[i + 2] = fill.b;
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  Rgb at(int x, int y) const {
    const std::size_t i = index(x, y);
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }

  void set(int x, int y, Rgb c) {
    const std::size_t i = index(x, y);
    pixels_[i] = c.r;
    pixels_[i + 1] = c.g;
    pixels_[i + 2] = c.b;
  }

  // 8-bit luma (Rec. 601 weights, rounded).
  std::uint8_t luma(int x, int y) const {
    const std::size_t i = index(x, y);
    return static_cast<std::uint8_t>(
        (299u * pixels_[i] + 587u * pixels_[i + 1] + 114u * pixels_[i + 2] + 500u) / 1000u);
  }

  const std::vector<std::uint8_t>& bytes() const noexcept { return pixels_; }
  std::vector<std::uint8_t>& bytes() noexcept { return pixels_; }

  friend bool operator==(const Raster&, const Raster&) = default;

private:
  static int checked(int w, int h) {
    if (w < 1 || h < 1) throw Error("renderer", "raster dimensions must be >= 1");
    return w * h;
  }
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// 64-bit FNV-1a over dimensions and pixel bytes, as 16 hex digits.
inline std::string content_hash(const Raster& r) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint8_t b) {
    h ^= b;
    h *= 1099511628211ull;
  };
  for (int v : {r.width(), r.height()})
    for (int s = 0; s < 32; s += 8) mix(static_cast<std::uint8_t>((static_cast<unsigned>(v) >> s) & 0xff));
  for (auto b : r.bytes()) mix(b);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::size_t foreground_count(const Raster& r) {
  std::size_t n = 0;
  const auto& b = r.bytes();
  for (std::size_t i = 0; i < b.size(); i += 3)
    if (b[i] != 255 || b[i + 1] != 255 || b[i + 2] != 255) ++n;
  return n;
}

}  // namespace geo
