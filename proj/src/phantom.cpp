#include "shadowae/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "shadowae/imageio.hpp"
#include "shadowae/json_util.hpp"

namespace shadowae {
namespace {

struct Ellipse {
  double row, col, radius_a, radius_b, angle, intensity;
};

// Soft elliptical weight: 1 inside 75% of the radius, linear to 0 at the rim.
double ellipse_weight(const Ellipse& e, double row, double col) {
  const double dy = row - e.row, dx = col - e.col;
  const double ca = std::cos(e.angle), sa = std::sin(e.angle);
  const double u = (dx * ca + dy * sa) / e.radius_a;
  const double v = (-dx * sa + dy * ca) / e.radius_b;
  const double d = std::sqrt(u * u + v * v);
  constexpr double soft = 0.25;
  return std::clamp((1.0 - d) / soft, 0.0, 1.0);
}

Ellipse sample_ellipse(const FanGeometry& fan, Rng& rng, const Range& radius,
                       const Range& intensity) {
  Ellipse e{};
  // Centre uniformly in the fan's polar box, kept away from the fan border.
  const double margin = 0.15;
  const double t = rng.uniform(fan.theta_min + margin * (fan.theta_max - fan.theta_min),
                               fan.theta_max - margin * (fan.theta_max - fan.theta_min));
  const double r = rng.uniform(fan.r_min + margin * (fan.r_max - fan.r_min),
                               fan.r_max - 2 * margin * (fan.r_max - fan.r_min));
  e.row = fan.apex_row + r * std::cos(t);
  e.col = fan.apex_col + r * std::sin(t);
  e.radius_a = rng.uniform(radius.lo, radius.hi);
  e.radius_b = rng.uniform(radius.lo, radius.hi);
  e.angle = rng.uniform(0.0, std::numbers::pi);
  e.intensity = rng.uniform(intensity.lo, intensity.hi);
  return e;
}

// Unit-variance, spatially correlated noise: white Gaussian smoothed by a
// 3x3 binomial kernel and rescaled.
std::vector<double> speckle_field(std::size_t w, std::size_t h, Rng& rng) {
  std::vector<double> white(w * h);
  for (auto& v : white) v = rng.normal();
  static constexpr double k[3] = {0.25, 0.5, 0.25};
  // Variance of the smoothed field is (sum k_i^2)^2 = 0.375^2.
  constexpr double rescale = 1.0 / 0.375;
  std::vector<double> out(w * h, 0.0);
  const auto clampi = [](std::ptrdiff_t v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(v, 0, static_cast<std::ptrdiff_t>(n) - 1));
  };
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const std::size_t rr = clampi(static_cast<std::ptrdiff_t>(r) + dy, h);
          const std::size_t cc = clampi(static_cast<std::ptrdiff_t>(c) + dx, w);
          acc += k[dy + 1] * k[dx + 1] * white[rr * w + cc];
        }
      out[r * w + c] = acc * rescale;
    }
  return out;
}

void check_range(const Range& r, double lo, double hi, const char* what) {
  if (!r.valid() || r.lo < lo || r.hi > hi) {
    throw ConfigError(std::string("phantom spec: ") + what + " range must be ordered within [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

std::string numbered(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%05zu.png", prefix, i);
  return buf;
}

}  // namespace

void PhantomSpec::validate() const {
  if (width == 0 || height == 0) throw ConfigError("phantom spec: image size must be positive");
  const FanGeometry g = fan();
  g.validate(width, height);
  if (!(background_level >= 0.0 && background_level <= 1.0)) {
    throw ConfigError("phantom spec: background_level must lie in [0, 1]");
  }
  if (num_blobs < 0 || num_cavities < 0) throw ConfigError("phantom spec: blob counts must be >= 0");
  check_range(blob_intensity, 0.0, 1.0, "blob_intensity");
  check_range(cavity_intensity, 0.0, 1.0, "cavity_intensity");
  check_range(blob_radius, 0.5, 1e9, "blob_radius");
  check_range(cavity_radius, 0.5, 1e9, "cavity_radius");
  if (!(speckle_strength >= 0.0)) throw ConfigError("phantom spec: speckle_strength must be >= 0");
  for (const auto& s : shadows) s.validate(g);
  (void)shadow_sampling.resolve(g);
}

BinaryMask fan_mask(const FanGeometry& geom, std::size_t width, std::size_t height) {
  BinaryMask m(width, height);
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c)
      m.set(r, c, geom.contains(static_cast<double>(r), static_cast<double>(c)));
  return m;
}

Phantom generate_phantom(const PhantomSpec& spec, Rng& rng) {
  spec.validate();
  const std::size_t w = spec.width, h = spec.height;
  const FanGeometry fan = spec.fan();

  std::vector<Ellipse> shapes;
  for (std::int64_t i = 0; i < spec.num_blobs; ++i)
    shapes.push_back(sample_ellipse(fan, rng, spec.blob_radius, spec.blob_intensity));
  for (std::int64_t i = 0; i < spec.num_cavities; ++i)
    shapes.push_back(sample_ellipse(fan, rng, spec.cavity_radius, spec.cavity_intensity));
  const auto noise = spec.speckle_strength > 0.0 ? speckle_field(w, h, rng) : std::vector<double>{};

  const ShadowMask shadows = rasterize_mask(spec.shadows, fan, w, h);
  const BinaryMask inside = fan_mask(fan, w, h);

  Phantom p{Tensor<float>(Shape{1, 1, h, w}), shadow_region(shadows), BinaryMask(w, h)};
  const std::size_t first_cavity = static_cast<std::size_t>(spec.num_blobs);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t i = r * w + c;
      if (!inside.pixels[i]) continue;
      double v = spec.background_level;
      for (std::size_t k = 0; k < shapes.size(); ++k) {
        const double wgt = ellipse_weight(shapes[k], static_cast<double>(r), static_cast<double>(c));
        v = v * (1.0 - wgt) + shapes[k].intensity * wgt;
        if (k >= first_cavity && wgt >= 0.5) p.cavity.pixels[i] = 1;
      }
      if (!noise.empty()) v *= 1.0 + spec.speckle_strength * noise[i];
      v = std::clamp(v, 0.0, 1.0);
      p.image[i] = static_cast<float>(v) * shadows.values[i];
    }
  }
  // Truth is only meaningful inside the field of view.
  for (std::size_t i = 0; i < p.truth.pixels.size(); ++i) p.truth.pixels[i] &= inside.pixels[i];
  return p;
}

std::vector<const CorpusEntry*> CorpusManifest::with_role(const std::string& role) const {
  std::vector<const CorpusEntry*> out;
  for (const auto& e : entries)
    if (e.role == role) out.push_back(&e);
  return out;
}

CorpusManifest build_corpus(const PhantomSpec& spec, std::size_t n_train, std::size_t n_eval,
                            std::uint64_t seed, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  if (n_train == 0 || n_eval == 0) throw ConfigError("build_corpus: counts must be > 0");
  spec.validate();
  const fs::path parent = fs::absolute(out_dir).parent_path();
  if (!fs::is_directory(parent)) {
    throw imageio::ImageError("build_corpus: parent directory " + parent.string() +
                              " does not exist");
  }
  std::error_code ec;
  fs::create_directories(out_dir / "train", ec);
  if (!ec) fs::create_directories(out_dir / "eval", ec);
  if (ec) {
    throw imageio::ImageError("build_corpus: cannot create " + out_dir.string() + ": " +
                              ec.message());
  }

  CorpusManifest m;
  m.root = out_dir;
  m.spec = spec;
  m.seed = seed;
  const FanGeometry fan = spec.fan();
  auto render = [&](const std::string& role, std::size_t i) {
    CorpusEntry e;
    e.role = role;
    e.seed = derive_seed(seed, "corpus." + role, i);
    Rng shadow_rng(e.seed, "shadows");
    e.sectors = sample_sectors(fan, shadow_rng, spec.shadow_sampling);
    PhantomSpec s = spec;
    s.shadows = e.sectors;
    Rng rng(e.seed, "phantom");
    const Phantom p = generate_phantom(s, rng);
    e.image_path = fs::path(role) / numbered("img", i);
    imageio::save(p.image, out_dir / e.image_path);
    if (role == "eval") {
      e.truth_path = fs::path(role) / numbered("truth", i);
      imageio::write_gray(imageio::from_mask(p.truth), out_dir / *e.truth_path);
      e.cavity_path = fs::path(role) / numbered("cavity", i);
      imageio::write_gray(imageio::from_mask(p.cavity), out_dir / *e.cavity_path);
    }
    m.entries.push_back(std::move(e));
  };
  for (std::size_t i = 0; i < n_train; ++i) render("train", i);
  for (std::size_t i = 0; i < n_eval; ++i) render("eval", i);

  nlohmann::json j;
  j["version"] = CorpusManifest::kVersion;
  j["seed"] = seed;
  j["spec"] = spec;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : m.entries) {
    nlohmann::json je{{"role", e.role}, {"image_path", e.image_path.generic_string()}, {"seed", e.seed},
                      {"sectors", e.sectors}};
    if (e.truth_path) je["truth_path"] = e.truth_path->generic_string();
    if (e.cavity_path) je["cavity_path"] = e.cavity_path->generic_string();
    j["entries"].push_back(std::move(je));
  }
  std::ofstream out(out_dir / "manifest.json");
  out << j.dump(2) << "\n";
  if (!out) throw imageio::ImageError("build_corpus: cannot write manifest");
  return m;
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  const fs::path file = fs::is_directory(path) ? path / "manifest.json" : path;
  std::ifstream in(file);
  if (!in) throw imageio::ImageError("corpus manifest not found: " + file.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw imageio::ImageError("corrupt corpus manifest " + file.string() + ": " + e.what());
  }
  CorpusManifest m;
  m.root = file.parent_path();
  try {
    check_keys(j, {"version", "seed", "spec", "entries"}, "manifest");
    if (j.at("version").get<int>() != CorpusManifest::kVersion) {
      throw ConfigError("manifest: unsupported version " + j.at("version").dump());
    }
    m.seed = j.at("seed").get<std::uint64_t>();
    m.spec = j.at("spec").get<PhantomSpec>();
    for (const auto& je : j.at("entries")) {
      check_keys(je, {"role", "image_path", "truth_path", "cavity_path", "seed", "sectors"}, "manifest entry");
      CorpusEntry e;
      e.role = je.at("role").get<std::string>();
      if (e.role != "train" && e.role != "eval") throw ConfigError("manifest: unknown role " + e.role);
      e.image_path = je.at("image_path").get<std::string>();
      if (je.contains("truth_path")) e.truth_path = je.at("truth_path").get<std::string>();
      if (je.contains("cavity_path")) e.cavity_path = je.at("cavity_path").get<std::string>();
      e.seed = je.at("seed").get<std::uint64_t>();
      if (je.contains("sectors")) e.sectors = je.at("sectors").get<std::vector<SectorSpec>>();
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw imageio::ImageError("corrupt corpus manifest " + file.string() + ": " + e.what());
  }
  for (const auto& e : m.entries) {
    for (const fs::path* rel : {&e.image_path, e.truth_path ? &*e.truth_path : nullptr,
                                e.cavity_path ? &*e.cavity_path : nullptr}) {
      if (!rel) continue;
      const auto img = imageio::read_gray(m.resolve(*rel));
      if (img.width != m.spec.width || img.height != m.spec.height) {
        throw imageio::ImageError("corpus file " + rel->string() + " is " + std::to_string(img.width) +
                                  "x" + std::to_string(img.height) + ", manifest declares " +
                                  std::to_string(m.spec.width) + "x" + std::to_string(m.spec.height));
      }
    }
  }
  return m;
}

void to_json(nlohmann::json& j, const PhantomSpec& s) {
  j = {{"width", s.width},
       {"height", s.height},
       {"background_level", s.background_level},
       {"num_blobs", s.num_blobs},
       {"blob_intensity", s.blob_intensity},
       {"blob_radius", s.blob_radius},
       {"num_cavities", s.num_cavities},
       {"cavity_intensity", s.cavity_intensity},
       {"cavity_radius", s.cavity_radius},
       {"speckle_strength", s.speckle_strength},
       {"shadows", s.shadows},
       {"shadow_sampling", s.shadow_sampling}};
  if (s.geometry) j["geometry"] = *s.geometry;
}

void from_json(const nlohmann::json& j, PhantomSpec& s) {
  check_keys(j,
             {"width", "height", "geometry", "background_level", "num_blobs", "blob_intensity",
              "blob_radius", "num_cavities", "cavity_intensity", "cavity_radius",
              "speckle_strength", "shadows", "shadow_sampling"},
             "phantom spec");
  read_opt(j, "width", s.width);
  read_opt(j, "height", s.height);
  if (j.contains("geometry")) s.geometry = j.at("geometry").get<FanGeometry>();
  read_opt(j, "background_level", s.background_level);
  read_opt(j, "num_blobs", s.num_blobs);
  read_opt(j, "blob_intensity", s.blob_intensity);
  read_opt(j, "blob_radius", s.blob_radius);
  read_opt(j, "num_cavities", s.num_cavities);
  read_opt(j, "cavity_intensity", s.cavity_intensity);
  read_opt(j, "cavity_radius", s.cavity_radius);
  read_opt(j, "speckle_strength", s.speckle_strength);
  read_opt(j, "shadows", s.shadows);
  read_opt(j, "shadow_sampling", s.shadow_sampling);
}

}  // namespace shadowae
