#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace xnor_rram {

/// Geometry of one XNOR macro: 64 XNOR rows (128 physical 1T1R rows) by 64 columns.
inline constexpr int kRows = 64;
inline constexpr int kCols = 64;
inline constexpr int kAdcCount = 8;
inline constexpr int kColumnsPerAdc = kCols / kAdcCount;
inline constexpr int kComparators = 7;
inline constexpr int kLevels = kComparators + 1;

/// Binary value in {+1, -1}.
using Bit = std::int8_t;

/// One wordline activation pattern, entries in {+1, -1}.
using InputVector = std::array<Bit, kRows>;

using Rng = std::mt19937_64;

// Error taxonomy; the CLI maps each to an exit code.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnprogrammedError : std::logic_error {
    using std::logic_error::logic_error;
};

struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a tuple of indices.
template <typename... Keys>
constexpr std::uint64_t derive_seed(std::uint64_t seed, Keys... keys) {
    std::uint64_t h = mix64(seed);
    ((h = mix64(h ^ static_cast<std::uint64_t>(keys))), ...);
    return h;
}

template <typename... Keys>
Rng make_stream(std::uint64_t seed, Keys... keys) {
    return Rng(derive_seed(seed, keys...));
}

/// Uniform double in [0, 1) built from the top 53 bits, identical on every platform.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal draw (Box-Muller, two uniforms per call, no cached state).
double standard_normal(Rng& rng);

inline bool is_binary(int v) { return v == 1 || v == -1; }

}  // namespace xnor_rram
