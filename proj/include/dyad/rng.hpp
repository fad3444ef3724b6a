#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace dyad {

using Rng = std::mt19937_64;

// Builds an engine whose state depends only on (seed, path). Distinct paths
// give statistically independent streams, so work can be scheduled in any
// order without changing results.
inline Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (path.size() + 1));
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (std::uint64_t p : path) push(p);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

// Child stream seeded from two draws of the parent.
inline Rng split_rng(Rng& parent, std::uint64_t tag = 0) {
  const std::uint64_t a = parent();
  const std::uint64_t b = parent();
  return derive_rng(a, {b, tag});
}

}  // namespace dyad
