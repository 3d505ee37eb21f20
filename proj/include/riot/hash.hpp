#pragma once

#include <cstdint>
#include <string_view>

namespace riot::hash {

// FNV-1a, 64 bit. Stable across platforms and runs, unlike std::hash.
constexpr std::uint64_t fnv1a(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept {
  std::uint64_t h = basis;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t combine(std::uint64_t a, std::uint64_t b) noexcept {
  return splitmix64(a ^ splitmix64(b));
}

/// Keyed hash of a string: distinct keys give independent hash families.
constexpr std::uint64_t keyed(std::string_view text, std::uint64_t key) noexcept {
  return fnv1a(text, combine(0xcbf29ce484222325ULL, key));
}

/// Maps 64 random bits onto [0, 1).
constexpr double unit_interval(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

} // namespace riot::hash
