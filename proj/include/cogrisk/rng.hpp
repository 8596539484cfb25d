#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cogrisk {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Seed for the named substream `tag` (and optional index) of a master seed.
constexpr std::uint64_t substream_seed(std::uint64_t master, std::string_view tag,
                                       std::uint64_t index = 0) {
  return mix_seed(mix_seed(master ^ hash_tag(tag)) + index);
}

inline Rng make_rng(std::uint64_t master, std::string_view tag, std::uint64_t index = 0) {
  return Rng(substream_seed(master, tag, index));
}

}  // namespace cogrisk
