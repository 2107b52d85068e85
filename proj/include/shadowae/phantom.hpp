#pragma once

// Ultrasound-like phantom images with known shadow ground truth, and the
// on-disk corpus built from them.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shadowae/binary_mask.hpp"
#include "shadowae/shadow_synth.hpp"

namespace shadowae {

struct PhantomSpec {
  std::size_t width = 64;
  std::size_t height = 64;
  /// Defaults to FanGeometry::for_image(width, height) when unset.
  std::optional<FanGeometry> geometry;
  double background_level = 0.45;
  std::int64_t num_blobs = 4;
  Range blob_intensity{0.25, 0.95};
  Range blob_radius{3.0, 9.0};
  /// Dark anatomy (fluid-filled cavities) that is not shadow.
  std::int64_t num_cavities = 1;
  Range cavity_intensity{0.0, 0.1};
  Range cavity_radius{4.0, 8.0};
  double speckle_strength = 0.3;
  /// True shadows rendered by generate_phantom().
  std::vector<SectorSpec> shadows;
  /// Per-image true-shadow sampling used by build_corpus().
  SamplingConfig shadow_sampling = [] {
    SamplingConfig c;
    c.count_max = 2;
    return c;
  }();

  FanGeometry fan() const { return geometry ? *geometry : FanGeometry::for_image(width, height); }
  void validate() const;
};

struct Phantom {
  Tensor<float> image;  // [1, 1, H, W] in [0, 1], zero outside the fan
  BinaryMask truth;     // shadow_region of the true shadows
  BinaryMask cavity;    // dark non-shadow anatomy (cavity weight >= 0.5, inside the fan)
};

Phantom generate_phantom(const PhantomSpec& spec, Rng& rng);

/// Pixels inside the fan.
BinaryMask fan_mask(const FanGeometry& geom, std::size_t width, std::size_t height);

struct CorpusEntry {
  std::string role;  // "train" or "eval"
  std::filesystem::path image_path;  // relative to the manifest directory
  std::optional<std::filesystem::path> truth_path;
  std::optional<std::filesystem::path> cavity_path;
  std::uint64_t seed = 0;
  std::vector<SectorSpec> sectors;  // true shadows rendered into the image
};

struct CorpusManifest {
  static constexpr int kVersion = 1;
  std::filesystem::path root;  // directory holding manifest.json
  PhantomSpec spec;
  std::uint64_t seed = 0;
  std::vector<CorpusEntry> entries;

  std::vector<const CorpusEntry*> with_role(const std::string& role) const;
  std::filesystem::path resolve(const std::filesystem::path& rel) const { return root / rel; }
};

/// Writes train/ and eval/ images plus manifest.json under out_dir. The
/// parent of out_dir must exist.
CorpusManifest build_corpus(const PhantomSpec& spec, std::size_t n_train, std::size_t n_eval,
                            std::uint64_t seed, const std::filesystem::path& out_dir);

/// Loads manifest.json from a corpus directory (or the file itself) and
/// checks every referenced file exists with the declared dimensions.
CorpusManifest load_manifest(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const PhantomSpec& s);
void from_json(const nlohmann::json& j, PhantomSpec& s);

}  // namespace shadowae
