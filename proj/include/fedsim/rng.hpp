// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace fedsim::rng {

/// Tags separating the independent random streams of one experiment.
enum class Purpose : std::uint64_t {
  kTeacher = 1,
  kPopulation = 2,
  kHeldOut = 3,
  kSelection = 4,
  kBatches = 5,
  kIidShards = 6,
  kNoise = 7,
  kInit = 8,
  kCentralized = 9,
};

/// Derives a 64-bit seed from (experiment seed, purpose, round, client, step)
/// by chaining the splitmix64 finalizer. Distinct keys give unrelated streams.
std::uint64_t stream_seed(std::uint64_t seed, Purpose purpose, std::uint64_t round = 0,
                          std::uint64_t client = 0, std::uint64_t step = 0) noexcept;

/// Deterministic random stream. The distributions are implemented here rather
/// than taken from <random> because the standard leaves their algorithms
/// unspecified, and golden files must not depend on the standard library.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}
  Stream(std::uint64_t seed, Purpose purpose, std::uint64_t round = 0, std::uint64_t client = 0,
         std::uint64_t step = 0)
      : engine_(stream_seed(seed, purpose, round, client, step)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal (Box-Muller, both outputs used).
  double normal();

  /// Uniform integer in [0, n), unbiased. n must be positive.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// First `k` entries of a uniformly random permutation of 0..n-1.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fedsim::rng
