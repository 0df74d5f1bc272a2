#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace guidesampler {

/// Deterministic random stream keyed by (seed, stream_id).
///
/// Streams are derived without coordination: chain i of a batch uses
/// RandomSource(seed, i), and nested work forks with substream().
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  RandomSource substream(std::uint64_t id) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1).
  double uniform_open();
  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }
  /// Index drawn proportionally to nonnegative weights. Throws DomainError if they sum to zero.
  std::size_t categorical(std::span<const double> weights);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace guidesampler
