#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace sarlin {

using Engine = std::mt19937_64;

// Tags separating the independent random streams derived from one master
// seed. Values are part of the reproducibility contract; do not renumber.
enum class StreamTag : std::uint64_t {
  weights = 1,
  sigma_chisq = 2,
  replication = 3,
  fixture = 4,
  dataset = 5,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Hashes (master, tag, path...) into a 64-bit seed. Distinct paths give
// statistically independent mt19937_64 streams.
inline std::uint64_t derive_seed(std::uint64_t master, StreamTag tag,
                                 std::initializer_list<std::uint64_t> path = {}) {
  std::uint64_t h = splitmix64(master ^ 0x5a5a'1234'abcd'0001ULL);
  h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
  for (std::uint64_t v : path) h = splitmix64(h ^ splitmix64(v + 0x632be59bd9b4e019ULL));
  return h;
}

inline Engine make_stream(std::uint64_t master, StreamTag tag,
                          std::initializer_list<std::uint64_t> path = {}) {
  const std::uint64_t s = derive_seed(master, tag, path);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
  return Engine(seq);
}

}  // namespace sarlin
