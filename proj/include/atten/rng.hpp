#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace atten {

// Counter-based generator: draw i is mix(key, i), so a stream's output depends
// only on (seed, stream, draw index). Forking derives an independent key,
// which keeps experiment results reproducible no matter how many draws any
// single consumer makes.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(mix(seed) ^ (0x9e3779b97f4a7c15ull * (stream + 1)))) {}

  std::uint64_t next_u64() {
    return mix(key_ + 0x9e3779b97f4a7c15ull * ++counter_);
  }

  // [0, 1)
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Box-Muller; draws exactly two uniforms per call.
  double next_normal() {
    double u1;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // [0, bound), unbiased
  std::uint64_t next_below(std::uint64_t bound) {
    std::uint64_t x, r;
    do {
      x = next_u64();
      r = x % bound;
    } while (x - r > std::uint64_t(0) - bound);
    return r;
  }

  bool next_bernoulli(double p) { return next_double() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(next_below(i))]);
    }
  }

  // Independent child stream; does not advance this generator.
  Rng fork(std::uint64_t substream) const {
    return Rng(FromKey{}, mix(key_ ^ mix(substream + 0x632be59bd9b4e019ull)));
  }

  Rng fork(std::string_view name) const { return fork(hash_name(name)); }

  // FNV-1a, used to derive per-tensor init streams from names.
  static std::uint64_t hash_name(std::string_view name) {
    std::uint64_t h = 1469598103934665603ull;
    for (const char c : name) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    return h;
  }

 private:
  struct FromKey {};
  Rng(FromKey, std::uint64_t key) : key_(key) {}

  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace atten
