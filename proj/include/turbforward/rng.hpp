#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace turbforward {

// FNV-1a over bytes; used for stream derivation and artifact content hashes.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 14695981039346656037ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  return fnv1a64(s.data(), s.size());
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// One generator per named substream: adding a stream never perturbs another's
// draws, and identical (seed, name) is bit-reproducible across runs.
inline std::mt19937_64 named_stream(std::uint64_t seed, std::string_view name) {
  return std::mt19937_64(splitmix64(seed ^ fnv1a64(name)));
}

// Gaussian draws with per-stream distribution state; streams never share the
// cached spare variate, so each (seed, name) sequence is self-contained.
struct NormalStream {
  std::mt19937_64 gen;
  std::normal_distribution<double> dist{0.0, 1.0};

  NormalStream(std::uint64_t seed, std::string_view name)
      : gen(named_stream(seed, name)) {}

  double next() { return dist(gen); }
};

}  // namespace turbforward
