#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "agpad/tensor.hpp"

namespace agpad {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_mix(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (0x9e3779b97f4a7c15ull + b + (a << 6) + (a >> 2)));
}

// FNV-1a, for deriving per-subsystem streams from string tags.
constexpr std::uint64_t hash_str(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Derive an independent stream seed from a root seed and a tag. Every
/// subsystem (init, shuffle, augmentation, synth, ...) pulls its own stream
/// so runs are reproducible piece by piece.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag) {
  return hash_mix(root, hash_str(tag));
}
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                                 std::uint64_t a) {
  return hash_mix(derive_seed(root, tag), a);
}
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                                 std::uint64_t a, std::uint64_t b) {
  return hash_mix(derive_seed(root, tag, a), b);
}

/// Deterministic PRNG with explicit distribution code, so the same seed
/// yields the same draws on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

  std::uint64_t u64() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive bounds
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(u64() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; the spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

template <typename Scalar>
void fill_uniform(Tensor<Scalar>& t, Rng& rng, double lo, double hi) {
  for (std::int64_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<Scalar>(rng.uniform(lo, hi));
  }
}

template <typename Scalar>
void fill_normal(Tensor<Scalar>& t, Rng& rng, double mean, double stddev) {
  for (std::int64_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<Scalar>(rng.normal(mean, stddev));
  }
}

}  // namespace agpad
