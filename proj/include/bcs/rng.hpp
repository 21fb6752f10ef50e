#ifndef BCS_RNG_HPP
#define BCS_RNG_HPP

#include <cstdint>
#include <limits>

namespace bcs {

// xoshiro256++ generator seeded through splitmix64.
//
// Every Rng remembers the root seed it was derived from, so independent
// substreams can be split off by key (stream()); substream identity depends
// only on (root seed, keys), never on how many variates were drawn. This is
// what makes parallel sweeps reproducible under any thread count.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : root_(seed) { reseed(seed); }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<std::uint64_t>::max();
  }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Derived independent stream keyed by up to three indices.
  Rng stream(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    std::uint64_t x = root_;
    x = splitmix(x ^ (0x9e3779b97f4a7c15ULL + a));
    x = splitmix(x ^ (0xbf58476d1ce4e5b9ULL + b));
    x = splitmix(x ^ (0x94d049bb133111ebULL + c));
    return Rng(x);
  }

  std::uint64_t root_seed() const { return root_; }

  // Uniform on [0,1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1].
  double uniform_pos() { return 1.0 - uniform(); }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  void reseed(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& s : s_) {
      x = splitmix(x);
      s = x;
    }
  }

  std::uint64_t s_[4];
  std::uint64_t root_;
};

}  // namespace bcs

#endif
