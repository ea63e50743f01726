#include "lateralsim/random.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace lateralsim {

std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  // Reject the short tail so every residue is equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

int poisson(Rng& rng, double mean) {
  constexpr double kChunk = 30.0;
  int total = 0;
  while (mean > 0.0) {
    const double lambda = mean > kChunk ? kChunk : mean;
    mean -= lambda;
    const double limit = std::exp(-lambda);
    double product = uniform01(rng);
    while (product > limit) {
      ++total;
      product *= uniform01(rng);
    }
  }
  return total;
}

std::size_t sample_categorical(Rng& rng, std::span<const double> weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) return uniform_index(rng, weights.size());
  const double target = uniform01(rng) * total;
  double running = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    running += weights[i];
    last_positive = i;
    if (target < running) return i;
  }
  return last_positive;
}

std::vector<int> sample_without_replacement(Rng& rng, int n, int k) {
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    std::size_t j = static_cast<std::size_t>(i) +
                    uniform_index(rng, static_cast<std::size_t>(n - i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    out.push_back(pool[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace lateralsim
