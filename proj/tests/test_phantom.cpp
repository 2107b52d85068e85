#include <catch_amalgamated.hpp>

#include <set>

#include "oracles.hpp"
#include "shadowae/imageio.hpp"
#include "shadowae/phantom.hpp"

using namespace shadowae;

namespace {

PhantomSpec plain() {
  PhantomSpec s;
  s.num_blobs = 0;
  s.num_cavities = 0;
  s.speckle_strength = 0.0;
  return s;
}

}  // namespace

TEST_CASE("plain phantom is background inside the fan and zero outside") {
  const auto spec = plain();
  Rng rng(1);
  const auto p = generate_phantom(spec, rng);
  const auto fan = fan_mask(spec.fan(), spec.width, spec.height);
  for (std::size_t i = 0; i < p.image.size(); ++i)
    CHECK(p.image[i] == Catch::Approx(fan.pixels[i] ? spec.background_level : 0.0));
  CHECK(p.truth.empty_region());
  CHECK(p.cavity.empty_region());
}

TEST_CASE("a true shadow darkens exactly its region") {
  auto spec = plain();
  spec.speckle_strength = 0.3;
  spec.num_blobs = 3;
  Rng r1(2), r2(2);
  const auto clean = generate_phantom(spec, r1);
  const auto fan = spec.fan();
  SectorSpec s;
  s.theta_center = 0.1;
  s.theta_width = 0.3;
  s.r_start = fan.r_min;
  s.r_end = fan.r_max;
  s.attenuation = 0.2;
  spec.shadows = {s};
  const auto shadowed = generate_phantom(spec, r2);
  CHECK_FALSE(shadowed.truth.empty_region());
  CHECK(shadowed.truth == shadow_region(rasterize_mask(spec.shadows, fan, spec.width, spec.height)));
  for (std::size_t i = 0; i < clean.image.size(); ++i) {
    CHECK(shadowed.image[i] <= clean.image[i]);
    if (!shadowed.truth.pixels[i]) CHECK(shadowed.image[i] == clean.image[i]);
  }
}

TEST_CASE("phantoms are deterministic, distinct across seeds and in range") {
  const PhantomSpec spec;
  std::set<std::vector<float>> seen;
  const auto fan = fan_mask(spec.fan(), spec.width, spec.height);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng a(seed), b(seed);
    const auto p = generate_phantom(spec, a);
    CHECK(p.image.storage() == generate_phantom(spec, b).image.storage());
    for (std::size_t i = 0; i < p.image.size(); ++i) {
      REQUIRE(p.image[i] >= 0.0f);
      REQUIRE(p.image[i] <= 1.0f);
      if (!fan.pixels[i]) REQUIRE(p.image[i] == 0.0f);
      if (p.cavity.pixels[i]) REQUIRE(fan.pixels[i]);
    }
    seen.insert(p.image.storage());
  }
  CHECK(seen.size() == 100);
}

TEST_CASE("cavities are dark") {
  PhantomSpec spec = plain();
  spec.num_cavities = 2;
  Rng rng(3);
  const auto p = generate_phantom(spec, rng);
  REQUIRE_FALSE(p.cavity.empty_region());
  for (std::size_t i = 0; i < p.image.size(); ++i)
    if (p.cavity.pixels[i]) CHECK(p.image[i] < spec.background_level);
}

TEST_CASE("corpus layout, determinism and manifest round trip") {
  const auto root = oracle::scratch_dir("corpus");
  PhantomSpec spec;
  const auto m = build_corpus(spec, 10, 5, 42, root / "a");
  CHECK(m.entries.size() == 15);
  CHECK(m.with_role("train").size() == 10);
  const auto evals = m.with_role("eval");
  REQUIRE(evals.size() == 5);
  for (const auto* e : evals) {
    REQUIRE(e->truth_path);
    const auto truth = imageio::to_mask(imageio::read_gray(m.resolve(*e->truth_path)));
    CHECK(truth == shadow_region(rasterize_mask(e->sectors, spec.fan(), spec.width, spec.height)));
  }
  for (const auto* e : m.with_role("train")) CHECK_FALSE(e->truth_path);

  std::set<std::uint64_t> seeds;
  for (const auto& e : m.entries) seeds.insert(e.seed);
  CHECK(seeds.size() == 15);

  build_corpus(spec, 10, 5, 42, root / "b");
  for (const auto& e : m.entries)
    CHECK(oracle::read_bytes(root / "a" / e.image_path) == oracle::read_bytes(root / "b" / e.image_path));
  CHECK(oracle::read_bytes(root / "a" / "manifest.json") == oracle::read_bytes(root / "b" / "manifest.json"));

  const auto loaded = load_manifest(root / "a");
  CHECK(loaded.entries.size() == 15);
  CHECK(loaded.seed == 42);
  CHECK(loaded.entries[12].sectors.size() == m.entries[12].sectors.size());

  std::filesystem::remove(root / "a" / m.entries[0].image_path);
  CHECK_THROWS(load_manifest(root / "a"));
}

TEST_CASE("corpus rejects bad counts and missing parents") {
  const auto root = oracle::scratch_dir("corpus_bad");
  CHECK_THROWS(build_corpus(PhantomSpec{}, 0, 5, 1, root / "x"));
  CHECK_THROWS(build_corpus(PhantomSpec{}, 2, 0, 1, root / "x"));
  CHECK_THROWS(build_corpus(PhantomSpec{}, 2, 2, 1, root / "no" / "parent"));
}

TEST_CASE("phantom spec round-trips through json") {
  PhantomSpec spec;
  spec.num_cavities = 3;
  spec.background_level = 0.4;
  const nlohmann::json j = spec;
  const auto back = j.get<PhantomSpec>();
  CHECK(back.num_cavities == 3);
  CHECK(back.background_level == 0.4);
  CHECK(nlohmann::json(back) == j);
}
