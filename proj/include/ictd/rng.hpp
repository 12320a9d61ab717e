#pragma once

#include <cstdint>
#include <string_view>

namespace ictd {

/// SplitMix64 finalizer. Bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t x);

/// Child seed for a sub-task: mixes the master seed, a command tag and an
/// index. Used everywhere a task needs its own independent stream.
std::uint64_t hash64(std::uint64_t master_seed, std::string_view tag, std::uint64_t index);

/// Counter-based 64-bit generator.
///
/// The i-th raw draw is mix64(seed + (i + 1) * 0x9E3779B97F4A7C15), i.e. the
/// SplitMix64 sequence. Normals come from the Box-Muller transform; the second
/// normal of each pair is cached and returned by the next call.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 bits of mantissa.
  double uniform();
  double uniform(double lo, double hi);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ictd
