#pragma once

// Deterministic randomness. Two generators live here:
//
//  * a counter-based standard-normal stream: the value at coordinates
//    (seed, t, i, j) is a pure function of those coordinates, so population
//    members can be evaluated in any order or in parallel and still see the
//    same draws;
//  * an 8-bit maximal-length LFSR that models the hardware noise source,
//    with a uniform output mode and a central-limit (sum of 12 uniforms)
//    approximation of a unit normal.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <utility>

#include "estrain/fixed_point.hpp"

namespace estrain {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Stable sub-seed derivation so independent consumers (data generation,
// input corruption, weight init, ES sampling) can share one user seed
// without overlapping streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return splitmix64(splitmix64(seed) ^ tag);
}

namespace seed_tag {
inline constexpr std::uint64_t synthetic_data = 0x5D47A1ull;
inline constexpr std::uint64_t input_noise = 0x1AB3E5ull;
inline constexpr std::uint64_t weight_init = 0x77C0DEull;
inline constexpr std::uint64_t shuffle = 0x0F15BAull;
}  // namespace seed_tag

namespace detail {
inline std::uint64_t mix_coords(std::uint64_t seed, std::uint64_t t, std::uint64_t i,
                                std::uint64_t j) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ t);
    h = splitmix64(h ^ i);
    return splitmix64(h ^ j);
}

inline double to_unit_open(std::uint64_t bits) {
    // (0, 1]: never zero, safe under log().
    return double((bits >> 11) + 1) * 0x1.0p-53;
}
}  // namespace detail

// Standard-normal variate at (seed, t, i, j) via Box-Muller on two hashed
// uniforms. No sequential state anywhere.
inline double normal(std::uint64_t seed, std::uint64_t t, std::uint64_t i, std::uint64_t j) {
    const std::uint64_t h = detail::mix_coords(seed, t, i, j);
    const double u1 = detail::to_unit_open(splitmix64(h ^ 0xD1B54A32D192ED03ull));
    const double u2 = detail::to_unit_open(splitmix64(h ^ 0x8CB92BA72F3D8DD7ull));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Fibonacci LFSR over x^8 + x^6 + x^5 + x^4 + 1 (maximal length, period
// 255). The output bit is the register LSB before the shift.
struct LfsrState {
    std::uint8_t reg = 1;

    explicit LfsrState(std::uint8_t r = 1) : reg(r) {
        if (reg == 0) throw std::invalid_argument("LfsrState: zero state is absorbing");
    }
};

inline std::pair<int, LfsrState> lfsr_step(LfsrState s) {
    const std::uint8_t r = s.reg;
    const int out = r & 1;
    const std::uint8_t fb =
        static_cast<std::uint8_t>(((r >> 0) ^ (r >> 2) ^ (r >> 3) ^ (r >> 4)) & 1);
    LfsrState next{static_cast<std::uint8_t>((r >> 1) | (fb << 7))};
    return {out, next};
}

enum class LfsrNoiseMode { uniform, clt_sum };

namespace detail {
// One uniform byte: advance four steps, then read the whole register.
// Consecutive register states are too correlated (each byte is a linear
// image of the previous one); a four-step stride brings the full-period
// ensemble variance of the CLT sum to 0.986.
inline std::pair<int, LfsrState> lfsr_draw(LfsrState s) {
    for (int k = 0; k < 4; ++k) s = lfsr_step(s).second;
    return {int(s.reg), s};
}
}  // namespace detail

// Hardware-style noise draw. uniform: one register sample centered into
// (-1, 1). clt_sum: twelve such samples summed and scaled; over the full
// 255-state ensemble the result has mean exactly zero and variance within
// 2% of one before quantization.
inline std::pair<Fixed, LfsrState> lfsr_noise(LfsrState s, const QFormat& fmt,
                                              LfsrNoiseMode mode) {
    require_valid(fmt);
    if (mode == LfsrNoiseMode::uniform) {
        auto [byte, next] = detail::lfsr_draw(s);
        return {quantize((byte - 128) / 128.0, fmt), next};
    }
    int sum = 0;
    for (int k = 0; k < 12; ++k) {
        auto [byte, next] = detail::lfsr_draw(s);
        sum += byte - 128;
        s = next;
    }
    return {quantize(sum / 255.0, fmt), s};
}

}  // namespace estrain
