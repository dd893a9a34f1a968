#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace lewisim {

// Deterministic xoshiro256** stream. All randomness in a run flows from one
// master seed through named substreams, so e.g. reinitializing the listener
// never perturbs the speaker's sampling stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Substream derived from a master seed, a stream name and an index.
  static Rng stream(std::uint64_t master_seed, std::string_view name,
                    std::uint64_t index = 0);

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double uniform();

  // Uniform in [lo, hi).
  double uniform(double lo, double hi);

  // Unbiased uniform integer in [0, n). Requires n >= 1.
  std::uint64_t uniform_int(std::uint64_t n);

  // Index sampled from unnormalized nonnegative weights.
  std::size_t categorical(const std::vector<double>& weights);

  // Index sampled from probabilities stored as logs (rows of log-softmax).
  std::size_t categorical_from_logp(const double* logp, std::size_t n);

  // k distinct values from [0, n), in draw order. Requires k <= n.
  std::vector<std::int64_t> sample_without_replacement(std::int64_t n,
                                                       std::int64_t k);

 private:
  std::uint64_t state_[4];
};

// FNV-1a over raw bytes; used for stream naming and parameter fingerprints.
std::uint64_t fnv1a(const void* data, std::size_t len,
                    std::uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace lewisim
