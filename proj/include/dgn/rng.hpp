#pragma once

#include <cstdint>
#include <vector>

namespace dgn {

// Deterministic RNG with explicitly defined output mapping. std::mt19937_64
// is seeded directly, but uniform() and shuffle() avoid the standard
// distributions and std::shuffle, whose outputs are implementation-defined;
// identical seeds must give identical runs on any toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

  std::uint64_t next_u64() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Derive an independent stream (e.g. one per epoch) from this seed.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
    Rng r(seed ^ (0x632be59bd9b4e019ULL * (stream_id + 1)));
    r.next_u64();
    return r;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace dgn
