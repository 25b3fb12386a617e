#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace vnreg {

using Rng = std::mt19937_64;

// Deterministic seed derivation. A master seed plus a path of stream ids
// (replicate index, operation tag, ...) maps to an independent 64-bit seed,
// so any replicate can be regenerated on its own.
std::uint64_t DeriveSeed(std::uint64_t master,
                         std::initializer_list<std::uint64_t> path);

// Uniform double in [0, 1) from the top 53 bits; identical across standard
// libraries, unlike std::uniform_real_distribution.
inline double Uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool Bernoulli(Rng& rng, double p) { return Uniform01(rng) < p; }

// Uniform integer in [0, n) by rejection; n > 0.
std::uint64_t UniformIndex(Rng& rng, std::uint64_t n);

// Standard normal via Box-Muller (deterministic across platforms).
double StandardNormal(Rng& rng);

// Stream tags used with DeriveSeed so call sites stay readable.
namespace stream {
inline constexpr std::uint64_t kGraph1 = 0x67'31;
inline constexpr std::uint64_t kGraph2 = 0x67'32;
inline constexpr std::uint64_t kContaminate = 0x63'6f;
inline constexpr std::uint64_t kDiffuse = 0x64'66;
inline constexpr std::uint64_t kCluster = 0x63'6c;
inline constexpr std::uint64_t kSeeds = 0x73'64;
inline constexpr std::uint64_t kBaseline = 0x62'6c;
inline constexpr std::uint64_t kRobust = 0x72'6b;
}  // namespace stream

}  // namespace vnreg
