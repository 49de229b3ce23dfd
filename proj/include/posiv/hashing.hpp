#pragma once

#include <cstdint>
#include <string_view>

namespace posiv {

// 64-bit FNV-1a. Used to map non-numeric ids onto the u64 id space.
constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// Order-sensitive combination of a running key with one more word.
constexpr std::uint64_t hash_combine(std::uint64_t key, std::uint64_t value) noexcept {
  return mix64(key + kGolden + mix64(value));
}

template <typename... Words>
constexpr std::uint64_t hash_words(std::uint64_t first, Words... rest) noexcept {
  std::uint64_t key = mix64(first);
  ((key = hash_combine(key, static_cast<std::uint64_t>(rest))), ...);
  return key;
}

}  // namespace posiv
