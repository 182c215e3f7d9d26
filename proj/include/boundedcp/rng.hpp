#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace boundedcp {

// SplitMix64 finalizer; bijective 64-bit mix used for seeding and for
// deriving independent child streams from a master seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic random stream. All draw paths are implemented here rather
// than via std::*_distribution so that results are bit-identical across
// standard libraries for a fixed seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

  // Child stream `id` of `master`. Streams with distinct ids are
  // statistically independent; the mapping is pure, so any replication
  // schedule that assigns stream ids by replication index reproduces
  // regardless of execution order.
  static Rng stream(std::uint64_t master, std::uint64_t id) {
    return Rng(splitmix64(master + 0x9e3779b97f4a7c15ULL * (id + 1)));
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the second member of each pair is
  // cached, so draws come in deterministic order.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]; keeps log finite
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Exact Binomial(n, prob) draw. Inverse transform on the cdf for n <= 64
  // (with the p > 1/2 mirror so the pmf recursion never starts from an
  // underflowed value); plain Bernoulli sum beyond that.
  int binomial(int n, double prob) {
    if (n <= 0) return 0;
    if (prob <= 0.0) return 0;
    if (prob >= 1.0) return n;
    if (prob > 0.5) return n - binomial_small_or_sum(n, 1.0 - prob);
    return binomial_small_or_sum(n, prob);
  }

 private:
  int binomial_small_or_sum(int n, double p) {
    if (n > 64) {
      int total = 0;
      for (int i = 0; i < n; ++i) total += (uniform() < p) ? 1 : 0;
      return total;
    }
    double q = 1.0 - p;
    double pmf = std::pow(q, n);  // >= 0.5^64, no underflow
    double cdf = pmf;
    double odds = p / q;
    double u = uniform();
    int k = 0;
    while (u > cdf && k < n) {
      ++k;
      pmf *= odds * static_cast<double>(n - k + 1) / static_cast<double>(k);
      cdf += pmf;
    }
    return k;
  }

  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace boundedcp
