#pragma once

// Convex-probe synthetic shadows: random annular sectors about the probe
// apex, rasterized into a multiplicative attenuation mask (background
// exactly 1) and injected into images by elementwise product.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "shadowae/binary_mask.hpp"
#include "shadowae/rng.hpp"
#include "shadowae/tensor.hpp"

namespace shadowae {

/// Closed interval used by every sampling configuration.
struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool valid() const { return lo <= hi; }
  bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Fan-shaped field of view of a convex probe.
///
/// Angles are radians measured from the image-down axis, positive towards
/// increasing column. The apex may lie above the image (negative row).
struct FanGeometry {
  double apex_row = 0.0;
  double apex_col = 0.0;
  double theta_min = -0.5;
  double theta_max = 0.5;
  double r_min = 0.0;
  double r_max = 1.0;

  struct Polar {
    double radius;
    double theta;
  };
  Polar polar(double row, double col) const;
  bool contains(double row, double col) const;

  /// Throws std::invalid_argument if the invariants do not hold or the fan
  /// misses a width x height image entirely.
  void validate(std::size_t width, std::size_t height) const;

  /// Default fan for an image: apex centred above the top edge, near edge
  /// at 10% of the height, far edge just past the bottom.
  static FanGeometry for_image(std::size_t width, std::size_t height);
};

struct SectorSpec {
  double theta_center = 0.0;
  double theta_width = 0.1;
  double r_start = 0.0;
  double r_end = 1.0;
  double attenuation = 0.3;  // mask value strictly inside the sector, in [0, 1)
  double edge_softness = 0.0;  // angular ramp width in radians

  void validate(const FanGeometry& geom) const;
  /// Coverage in [0, 1] at a polar position: 1 strictly inside (beyond the
  /// angular ramp), 0 outside, linear across the ramp.
  double coverage(const FanGeometry::Polar& p) const;
};

struct SamplingConfig {
  std::int64_t count_min = 1;
  std::int64_t count_max = 3;
  Range theta_width{0.05, 0.35};
  Range attenuation{0.05, 0.6};
  Range edge_softness{0.02, 0.02};
  /// Radial ranges in pixels. When unset, r_start spans the near half of
  /// the fan [r_min, (r_min + r_max)/2] and r_end is fixed at r_max.
  std::optional<Range> r_start;
  std::optional<Range> r_end;

  /// Validates against a fan and fills the defaulted radial ranges.
  SamplingConfig resolve(const FanGeometry& geom) const;
};

/// Multiplicative attenuation map, row-major width x height, values in [0, 1].
struct ShadowMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> values;

  ShadowMask() = default;
  ShadowMask(std::size_t w, std::size_t h) : width(w), height(h), values(w * h, 1.0f) {}

  float operator()(std::size_t row, std::size_t col) const { return values[row * width + col]; }
  /// As a [1, 1, H, W] tensor.
  Tensor<float> to_tensor() const;
  bool operator==(const ShadowMask&) const = default;
};

std::vector<SectorSpec> sample_sectors(const FanGeometry& geom, Rng& rng,
                                       const SamplingConfig& cfg);

ShadowMask rasterize_mask(const std::vector<SectorSpec>& sectors, const FanGeometry& geom,
                          std::size_t width, std::size_t height);

/// x~ = x o mask. x must hold exactly one width x height image (any leading
/// extents of 1).
Tensor<float> inject(const Tensor<float>& x, const ShadowMask& mask);

/// Pixels where the mask attenuates (value < 1).
BinaryMask shadow_region(const ShadowMask& mask);

void to_json(nlohmann::json& j, const Range& r);
void from_json(const nlohmann::json& j, Range& r);
void to_json(nlohmann::json& j, const FanGeometry& g);
void from_json(const nlohmann::json& j, FanGeometry& g);
void to_json(nlohmann::json& j, const SectorSpec& s);
void from_json(const nlohmann::json& j, SectorSpec& s);
void to_json(nlohmann::json& j, const SamplingConfig& c);
void from_json(const nlohmann::json& j, SamplingConfig& c);

}  // namespace shadowae
