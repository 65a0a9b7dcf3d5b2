#pragma once

#include <cstdint>
#include <random>

namespace aquinv {

// splitmix64; used to derive independent substream seeds from (master, ids).
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                    std::uint64_t c = 0) {
  return mix64(mix64(mix64(master ^ mix64(a)) ^ mix64(b)) ^ mix64(c));
}

inline std::mt19937_64 make_rng(std::uint64_t master, std::uint64_t a = 0, std::uint64_t b = 0,
                                std::uint64_t c = 0) {
  return std::mt19937_64(substream_seed(master, a, b, c));
}

}  // namespace aquinv
