#pragma once

#include <cstdint>
#include <random>

namespace hypam {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of substream `index` under `master`. Depends only on the pair, so
/// ensembles are reproducible regardless of which worker runs which path.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return splitmix64(master ^ splitmix64(index));
}

inline Rng make_stream(std::uint64_t master, std::uint64_t index) {
  return Rng(stream_seed(master, index));
}

// Salts that keep the independent streams of one experiment apart.
inline constexpr std::uint64_t kTimeSampleSalt = 0x7469'6d65'7361'6d70ULL;
inline constexpr std::uint64_t kStartSalt = 0x7374'6172'7470'6169ULL;

}  // namespace hypam
