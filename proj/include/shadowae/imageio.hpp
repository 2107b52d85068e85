#pragma once

// 8-bit grayscale PNG / binary PGM (P5) reading and writing. The format is
// chosen from the file extension (.png, .pgm).

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "shadowae/binary_mask.hpp"
#include "shadowae/tensor.hpp"

namespace shadowae::imageio {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
  bool operator==(const GrayImage&) const = default;
};

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, 3 bytes per pixel
};

GrayImage read_gray(const std::filesystem::path& path);
void write_gray(const GrayImage& img, const std::filesystem::path& path);
void write_rgb_png(const RgbImage& img, const std::filesystem::path& path);
RgbImage read_rgb_png(const std::filesystem::path& path);

/// byte = round(255 v) with ties to even. Throws for v outside [0, 1].
std::uint8_t quantize(float v);

/// Image as a [1, 1, H, W] tensor with value byte / 255.
Tensor<float> load(const std::filesystem::path& path);

/// Saves a tensor holding exactly one H x W plane (leading extents 1).
void save(const Tensor<float>& t, const std::filesystem::path& path);

Tensor<float> to_tensor(const GrayImage& img);
GrayImage from_tensor(const Tensor<float>& t);

/// Binary masks are stored as 0 / 255 grayscale; nonzero reads as true.
GrayImage from_mask(const BinaryMask& m);
BinaryMask to_mask(const GrayImage& img);

}  // namespace shadowae::imageio
