#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace toolbandit {

/// Seeded generator with platform-independent derived distributions.
/// std::mt19937_64 has a standardized output sequence; the library's
/// distributions are not, so uniform/normal/index draws are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();

  /// Uniform integer in [0, n). Requires n > 0. Rejection sampling, no modulo bias.
  std::size_t index(std::size_t n);

  /// Standard normal via Box-Muller; consumes exactly two draws.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  std::string serialize() const;
  static Rng deserialize(const std::string& state);

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Derives an independent stream seed from a base seed and a salt (splitmix64).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);

}  // namespace toolbandit
