#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace shadowae {

/// Mixes a master seed, a stream name and an index into an independent seed.
/// Used to split one --seed into named sub-streams (corpus, init, shuffle,
/// injection) and per-step/per-image streams.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0);

/// Random stream with platform-stable conversions.
///
/// std::mt19937_64 output is fully specified by the standard, but the
/// standard distributions are not, so conversions to real values are done
/// here to keep corpora and training runs bit-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0)
      : engine_(derive_seed(seed, stream, index)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi]; returns lo when the range is degenerate.
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace shadowae
