#pragma once

#include <cstdint>
#include <string_view>

namespace edgeplace {

// splitmix64 step. Also usable as a one-shot scrambler of a 64-bit value.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t scramble(std::uint64_t x) { return splitmix64(x); }

// Deterministic seed for a named sub-stream. Every random draw in a run
// descends from the top-level seed through one of these, so adding a new
// knob never perturbs draws taken from the other streams.
inline std::uint64_t substream_seed(std::uint64_t root, std::string_view name) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a offset basis
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  std::uint64_t s = root ^ h;
  return splitmix64(s);
}

// Maps 64 random bits onto [0, 1).
inline double unit_interval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace edgeplace
