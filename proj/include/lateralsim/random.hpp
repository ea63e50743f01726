#pragma once

// Seeded sampling helpers. The standard <random> distributions are
// implementation-defined, so everything that feeds simulation output is
// built directly on the raw 64-bit engine to keep runs bit-reproducible
// across standard libraries.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace lateralsim {

using Rng = std::mt19937_64;

// splitmix64 finalizer over (master, index): child seeds for episodes, epochs.
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index);

// Uniform double in [0, 1) with 53 bits of resolution.
double uniform01(Rng& rng);

// Unbiased uniform integer in [0, n). n must be > 0.
std::size_t uniform_index(Rng& rng, std::size_t n);

bool bernoulli(Rng& rng, double p);

// Poisson variate; large means are split into chunks so exp(-mean) never
// underflows.
int poisson(Rng& rng, double mean);

// Index drawn proportionally to non-negative weights. Falls back to uniform
// when all weights are zero.
std::size_t sample_categorical(Rng& rng, std::span<const double> weights);

// Fisher-Yates shuffle with uniform_index.
template <typename T>
void shuffle(std::vector<T>& values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(values[i - 1], values[j]);
  }
}

// k distinct elements of [0, n) in draw order (partial Fisher-Yates).
std::vector<int> sample_without_replacement(Rng& rng, int n, int k);

}  // namespace lateralsim
