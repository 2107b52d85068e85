#include "shadowae/shadow_synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "shadowae/json_util.hpp"

namespace shadowae {

FanGeometry::Polar FanGeometry::polar(double row, double col) const {
  const double dy = row - apex_row;
  const double dx = col - apex_col;
  return {std::hypot(dy, dx), std::atan2(dx, dy)};
}

bool FanGeometry::contains(double row, double col) const {
  const Polar p = polar(row, col);
  return p.radius >= r_min && p.radius <= r_max && p.theta >= theta_min && p.theta <= theta_max;
}

void FanGeometry::validate(std::size_t width, std::size_t height) const {
  if (!(theta_min < theta_max)) throw ConfigError("fan geometry: theta_min must be < theta_max");
  if (!(r_min >= 0.0 && r_min < r_max)) {
    throw ConfigError("fan geometry: need 0 <= r_min < r_max");
  }
  if (width == 0 || height == 0) throw ConfigError("fan geometry: empty image");
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c)
      if (contains(static_cast<double>(r), static_cast<double>(c))) return;
  throw ConfigError("fan geometry: fan does not intersect the " + std::to_string(width) + "x" +
                    std::to_string(height) + " image");
}

FanGeometry FanGeometry::for_image(std::size_t width, std::size_t height) {
  const double h = static_cast<double>(height);
  FanGeometry g;
  g.apex_row = -0.3 * h;
  g.apex_col = (static_cast<double>(width) - 1.0) / 2.0;
  g.theta_min = -0.5;
  g.theta_max = 0.5;
  g.r_min = 0.4 * h;
  g.r_max = 1.35 * h;
  return g;
}

void SectorSpec::validate(const FanGeometry& geom) const {
  if (!(theta_width > 0.0)) throw ConfigError("sector: theta_width must be > 0");
  if (!(r_start < r_end)) throw ConfigError("sector: r_start must be < r_end");
  if (!(attenuation >= 0.0 && attenuation < 1.0)) {
    throw ConfigError("sector: attenuation must lie in [0, 1)");
  }
  if (!(edge_softness >= 0.0)) throw ConfigError("sector: edge_softness must be >= 0");
  constexpr double slack = 1e-12;
  if (theta_center - theta_width / 2 < geom.theta_min - slack ||
      theta_center + theta_width / 2 > geom.theta_max + slack) {
    throw ConfigError("sector: angular extent leaves the fan");
  }
}

double SectorSpec::coverage(const FanGeometry::Polar& p) const {
  if (p.radius < r_start || p.radius >= r_end) return 0.0;
  const double inside = theta_width / 2 - std::abs(p.theta - theta_center);
  if (inside <= 0.0) return 0.0;
  if (edge_softness <= 0.0 || inside >= edge_softness) return 1.0;
  return inside / edge_softness;
}

SamplingConfig SamplingConfig::resolve(const FanGeometry& geom) const {
  SamplingConfig c = *this;
  if (!c.r_start) c.r_start = Range{geom.r_min, 0.5 * (geom.r_min + geom.r_max)};
  if (!c.r_end) c.r_end = Range{geom.r_max, geom.r_max};
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("shadow sampling: ") + what);
  };
  need(count_min >= 0 && count_min <= count_max, "count range must satisfy 0 <= min <= max");
  need(c.theta_width.valid() && c.theta_width.lo > 0.0, "theta_width range must be positive and ordered");
  need(c.theta_width.hi <= geom.theta_max - geom.theta_min, "theta_width exceeds the fan span");
  need(c.attenuation.valid() && c.attenuation.lo >= 0.0 && c.attenuation.hi < 1.0,
       "attenuation range must be ordered within [0, 1)");
  need(c.edge_softness.valid() && c.edge_softness.lo >= 0.0, "edge_softness range must be ordered and >= 0");
  need(c.r_start->valid() && c.r_end->valid(), "radial ranges must be ordered");
  need(c.r_start->lo >= geom.r_min && c.r_end->hi <= geom.r_max, "radial ranges must lie within the fan");
  need(c.r_start->hi < c.r_end->lo, "r_start range must end before the r_end range begins");
  return c;
}

Tensor<float> ShadowMask::to_tensor() const { return Tensor<float>(Shape{1, 1, height, width}, values); }

std::vector<SectorSpec> sample_sectors(const FanGeometry& geom, Rng& rng,
                                       const SamplingConfig& cfg) {
  const SamplingConfig c = cfg.resolve(geom);
  const auto n = rng.uniform_int(c.count_min, c.count_max);
  std::vector<SectorSpec> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    SectorSpec s;
    s.theta_width = rng.uniform(c.theta_width.lo, c.theta_width.hi);
    const double half = s.theta_width / 2;
    s.theta_center = rng.uniform(geom.theta_min + half, geom.theta_max - half);
    s.r_start = rng.uniform(c.r_start->lo, c.r_start->hi);
    s.r_end = rng.uniform(c.r_end->lo, c.r_end->hi);
    s.attenuation = rng.uniform(c.attenuation.lo, c.attenuation.hi);
    s.edge_softness = rng.uniform(c.edge_softness.lo, c.edge_softness.hi);
    out.push_back(s);
  }
  return out;
}

ShadowMask rasterize_mask(const std::vector<SectorSpec>& sectors, const FanGeometry& geom,
                          std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) throw std::invalid_argument("rasterize_mask: empty image");
  ShadowMask mask(width, height);
  if (sectors.empty()) return mask;
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const auto p = geom.polar(static_cast<double>(r), static_cast<double>(c));
      double v = 1.0;
      for (const auto& s : sectors) {
        const double cov = s.coverage(p);
        if (cov > 0.0) v = std::min(v, 1.0 - (1.0 - s.attenuation) * cov);
      }
      mask.values[r * width + c] = static_cast<float>(v);
    }
  }
  return mask;
}

Tensor<float> inject(const Tensor<float>& x, const ShadowMask& mask) {
  const auto& s = x.shape();
  if (s.size() < 2 || s[s.size() - 1] != mask.width || s[s.size() - 2] != mask.height ||
      x.size() != mask.values.size()) {
    throw std::invalid_argument("inject: image " + shape_str(s) + " does not match " +
                                std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                                " mask");
  }
  Tensor<float> out(s);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * mask.values[i];
  return out;
}

BinaryMask shadow_region(const ShadowMask& mask) {
  BinaryMask region(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.values.size(); ++i) region.pixels[i] = mask.values[i] < 1.0f;
  return region;
}

void to_json(nlohmann::json& j, const Range& r) { j = nlohmann::json::array({r.lo, r.hi}); }
void from_json(const nlohmann::json& j, Range& r) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("range: expected [lo, hi]");
  r.lo = j[0].get<double>();
  r.hi = j[1].get<double>();
  if (!r.valid()) throw ConfigError("range: lo > hi");
}

void to_json(nlohmann::json& j, const FanGeometry& g) {
  j = {{"apex_row", g.apex_row}, {"apex_col", g.apex_col}, {"theta_min", g.theta_min},
       {"theta_max", g.theta_max}, {"r_min", g.r_min},     {"r_max", g.r_max}};
}
void from_json(const nlohmann::json& j, FanGeometry& g) {
  check_keys(j, {"apex_row", "apex_col", "theta_min", "theta_max", "r_min", "r_max"}, "fan");
  read_opt(j, "apex_row", g.apex_row);
  read_opt(j, "apex_col", g.apex_col);
  read_opt(j, "theta_min", g.theta_min);
  read_opt(j, "theta_max", g.theta_max);
  read_opt(j, "r_min", g.r_min);
  read_opt(j, "r_max", g.r_max);
}

void to_json(nlohmann::json& j, const SectorSpec& s) {
  j = {{"theta_center", s.theta_center}, {"theta_width", s.theta_width},
       {"r_start", s.r_start},           {"r_end", s.r_end},
       {"attenuation", s.attenuation},   {"edge_softness", s.edge_softness}};
}
void from_json(const nlohmann::json& j, SectorSpec& s) {
  check_keys(j, {"theta_center", "theta_width", "r_start", "r_end", "attenuation", "edge_softness"},
             "sector");
  s.theta_center = j.at("theta_center").get<double>();
  s.theta_width = j.at("theta_width").get<double>();
  s.r_start = j.at("r_start").get<double>();
  s.r_end = j.at("r_end").get<double>();
  s.attenuation = j.at("attenuation").get<double>();
  s.edge_softness = j.at("edge_softness").get<double>();
}

void to_json(nlohmann::json& j, const SamplingConfig& c) {
  j = {{"count", {c.count_min, c.count_max}},
       {"theta_width", c.theta_width},
       {"attenuation", c.attenuation},
       {"edge_softness", c.edge_softness}};
  if (c.r_start) j["r_start"] = *c.r_start;
  if (c.r_end) j["r_end"] = *c.r_end;
}
void from_json(const nlohmann::json& j, SamplingConfig& c) {
  check_keys(j, {"count", "theta_width", "attenuation", "edge_softness", "r_start", "r_end"},
             "shadow sampling");
  if (auto it = j.find("count"); it != j.end()) {
    if (!it->is_array() || it->size() != 2) throw ConfigError("shadow sampling: count must be [min, max]");
    c.count_min = (*it)[0].get<std::int64_t>();
    c.count_max = (*it)[1].get<std::int64_t>();
  }
  read_opt(j, "theta_width", c.theta_width);
  read_opt(j, "attenuation", c.attenuation);
  read_opt(j, "edge_softness", c.edge_softness);
  if (auto it = j.find("r_start"); it != j.end()) c.r_start = it->get<Range>();
  if (auto it = j.find("r_end"); it != j.end()) c.r_end = it->get<Range>();
}

}  // namespace shadowae
