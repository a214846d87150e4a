#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace cmi {

// Deterministic random stream. One root seed per experiment manifest; every
// stochastic consumer derives its own child stream from (root seed, purpose
// label) so that unrelated components never share draws.
//
// Distribution sampling is hand-rolled on top of the raw engine output:
// std::uniform_real_distribution et al. are implementation-defined, which
// would tie run reproducibility to a standard library version.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_mix_(seed) {}

  // Child stream keyed by a purpose label, e.g. rng.derive("splits").
  Rng derive(std::string_view label) const {
    // FNV-1a over the label, mixed with the original seed.
    std::uint64_t h = 14695981039346656037ull ^ seed_mix_;
    for (char c : label) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    Rng child(h);
    child.seed_mix_ = h;
    return child;
  }

  Rng derive(std::string_view label, std::uint64_t index) const {
    Rng child = derive(label);
    child.engine_.discard(0);
    std::uint64_t h = child.seed_mix_;
    h ^= index + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    Rng out(h);
    out.seed_mix_ = h;
    return out;
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive integer range.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    // Rejection sampling keeps the distribution exact.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; the spare draw is discarded so the visible state is just the
  // engine position.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j =
          static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_mix_ = 0;

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.engine_ == b.engine_;
  }
};

}  // namespace cmi
