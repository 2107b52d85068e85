#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace shadowae {

/// Row-major width x height boolean map; true marks a shadow pixel.
struct BinaryMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // 0 or 1

  BinaryMask() = default;
  BinaryMask(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h, 0) {}

  bool operator()(std::size_t row, std::size_t col) const { return pixels[row * width + col] != 0; }
  void set(std::size_t row, std::size_t col, bool v) { pixels[row * width + col] = v ? 1 : 0; }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto p : pixels) n += p;
    return n;
  }
  bool empty_region() const { return count() == 0; }
  bool same_shape(const BinaryMask& o) const { return width == o.width && height == o.height; }
  bool operator==(const BinaryMask&) const = default;
};

}  // namespace shadowae
