#ifndef MACBIG_RNG_HPP
#define MACBIG_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace macbig {

// Deterministic random stream. mt19937_64 output is pinned by the standard, so
// the same seed gives the same sequence on every platform. The float/integer
// conversions are defined here because the std distributions and std::shuffle
// are implementation-defined and would break cross-platform reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform in [0,1), 53 random mantissa bits
  double next_unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // uniform integer in [0,n); modulo bias is negligible for n << 2^64
  std::uint64_t below(std::uint64_t n) { return gen_() % n; }

  // Independent child stream keyed on (seed, stream id). Children never touch
  // this stream's state, so parallel consumers stay deterministic.
  Rng child(std::uint64_t stream) const {
    return Rng(splitmix64(seed_ + 0x9e3779b97f4a7c15ULL * (stream + 1)));
  }

  std::uint64_t seed() const { return seed_; }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

// Fisher-Yates with our own bounded draws (std::shuffle is not portable).
template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace macbig

#endif
