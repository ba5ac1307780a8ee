#pragma once

#include <cstdint>
#include <optional>

namespace gist {

/// SplitMix64 generator with a per-stream increment.
///
/// The state advances by an odd `gamma` derived from the stream id, and each
/// output is the standard SplitMix64 finalizer applied to the new state. The
/// sequence depends only on (seed, stream_id), so it is identical on every
/// platform. Normal variates use Box-Muller on two uniforms; the second value
/// of each pair is cached and returned by the next call.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  bool bernoulli(double p);
  double normal();

  static std::uint64_t mix64(std::uint64_t z);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t state_;
  std::uint64_t gamma_;
  std::optional<double> cached_normal_;
};

/// Stable 64-bit FNV-1a hash, used to derive stream ids from names.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t stream_id_for(const char* name);

}  // namespace gist
