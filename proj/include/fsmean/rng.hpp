#pragma once

#include <cstdint>
#include <random>

namespace fsmean {

/// Seeded random stream. Sub-streams are derived deterministically so that
/// per-curve generation does not depend on scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(make_seq(seed, 0)) {}

  /// Independent stream number `index` derived from this stream's seed.
  Rng split(std::uint64_t index) const { return Rng(seed_, index + 1); }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double normal() { return normal_(engine_); }
  std::mt19937_64& engine() { return engine_; }
  std::uint64_t seed() const { return seed_; }

 private:
  Rng(std::uint64_t seed, std::uint64_t stream) : seed_(seed ^ (0x9e3779b97f4a7c15ULL * stream)), engine_(make_seq(seed, stream)) {}

  static std::mt19937_64 make_seq(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace fsmean
