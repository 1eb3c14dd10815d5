#pragma once

// Saturating two's-complement fixed-point arithmetic: Q-format scalars,
// power-of-two values with shift-based multiplication, and 32-bit
// saturating accumulators. All operations are pure; values are immutable
// once constructed.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace estrain {

struct QFormat {
    int total_bits = 0;
    int frac_bits = 0;
    bool is_signed = true;

    static constexpr QFormat sgn(int total, int frac) { return {total, frac, true}; }
    static constexpr QFormat uns(int total, int frac) { return {total, frac, false}; }

    constexpr bool valid() const {
        if (total_bits < 2 || total_bits > 32) return false;
        int max_frac = total_bits - (is_signed ? 1 : 0);
        return frac_bits >= 0 && frac_bits <= max_frac;
    }

    constexpr std::int64_t min_mantissa() const {
        return is_signed ? -(std::int64_t{1} << (total_bits - 1)) : 0;
    }
    constexpr std::int64_t max_mantissa() const {
        return is_signed ? (std::int64_t{1} << (total_bits - 1)) - 1
                         : (std::int64_t{1} << total_bits) - 1;
    }

    double step() const { return std::ldexp(1.0, -frac_bits); }
    double min_value() const { return std::ldexp(double(min_mantissa()), -frac_bits); }
    double max_value() const { return std::ldexp(double(max_mantissa()), -frac_bits); }

    constexpr bool operator==(const QFormat& o) const {
        return total_bits == o.total_bits && frac_bits == o.frac_bits &&
               is_signed == o.is_signed;
    }
    constexpr bool operator!=(const QFormat& o) const { return !(*this == o); }
};

inline void require_valid(const QFormat& f) {
    if (!f.valid())
        throw std::invalid_argument("invalid Q-format: total=" + std::to_string(f.total_bits) +
                                    " frac=" + std::to_string(f.frac_bits) +
                                    (f.is_signed ? " signed" : " unsigned"));
}

inline std::int64_t saturate_mantissa(std::int64_t m, const QFormat& f) {
    const std::int64_t lo = f.min_mantissa(), hi = f.max_mantissa();
    return m < lo ? lo : (m > hi ? hi : m);
}

// Round v / 2^shift to nearest, ties away from zero. |v| must stay below
// 2^62 so the halfway addend cannot overflow.
inline std::int64_t round_shift_right(std::int64_t v, int shift) {
    if (shift <= 0) return v;
    if (shift >= 63) {
        // Result magnitude is below 0.5 for any mantissa this library produces.
        return 0;
    }
    const std::int64_t half = std::int64_t{1} << (shift - 1);
    if (v >= 0) return (v + half) >> shift;
    return -((-v + half) >> shift);
}

struct Fixed {
    std::int64_t mantissa = 0;
    QFormat fmt{};

    double value() const { return std::ldexp(double(mantissa), -fmt.frac_bits); }
};

// Nearest representable value, ties away from zero, saturating at the
// format bounds. Scaling by 2^frac is exact in binary floating point, so
// the tie decision is made on x itself.
inline Fixed quantize(double x, const QFormat& fmt) {
    require_valid(fmt);
    double scaled = std::ldexp(x, fmt.frac_bits);
    const double lo = double(fmt.min_mantissa()), hi = double(fmt.max_mantissa());
    if (!(scaled > lo - 1.0)) return {fmt.min_mantissa(), fmt};
    if (!(scaled < hi + 1.0)) return {fmt.max_mantissa(), fmt};
    std::int64_t m = std::llround(scaled);  // ties away from zero
    return {saturate_mantissa(m, fmt), fmt};
}

// Re-express an exact value m * 2^-from_frac in the target format,
// rounding to nearest (ties away) and saturating.
inline Fixed requantize(std::int64_t m, int from_frac, const QFormat& to) {
    const int shift = from_frac - to.frac_bits;
    std::int64_t r;
    if (shift >= 0) {
        r = round_shift_right(m, shift);
    } else {
        const int up = -shift;
        if (up >= 62 || std::llabs(m) > (std::int64_t{1} << (62 - up)))
            r = m < 0 ? std::numeric_limits<std::int64_t>::min() / 2
                      : std::numeric_limits<std::int64_t>::max() / 2;
        else
            r = m << up;
    }
    return {saturate_mantissa(r, to), to};
}

// 32-bit saturating accumulator. frac_bits records the alignment of the
// quantity being accumulated; it never changes after construction.
struct Accumulator {
    std::int32_t value = 0;
    int frac_bits = 0;
};

inline std::int32_t saturating_add32(std::int32_t acc, std::int64_t delta) {
    const std::int64_t s = std::int64_t{acc} + delta;
    if (s > std::numeric_limits<std::int32_t>::max())
        return std::numeric_limits<std::int32_t>::max();
    if (s < std::numeric_limits<std::int32_t>::min())
        return std::numeric_limits<std::int32_t>::min();
    return static_cast<std::int32_t>(s);
}

// acc += a * b with the product formed exactly and the accumulator
// saturating. The caller must have aligned the accumulator to the product
// fraction; a mismatch is a contract violation.
inline void fixed_mul_acc(const Fixed& a, const Fixed& b, Accumulator& acc) {
    if (a.fmt.frac_bits + b.fmt.frac_bits != acc.frac_bits)
        throw std::invalid_argument("fixed_mul_acc: accumulator alignment " +
                                    std::to_string(acc.frac_bits) + " != " +
                                    std::to_string(a.fmt.frac_bits + b.fmt.frac_bits));
    acc.value = saturating_add32(acc.value, std::int64_t{a.mantissa} * b.mantissa);
}

// sign * 2^exponent. sign == 0 is the canonical zero; the exponent is
// ignored in that case.
struct Po2 {
    int sign = 0;
    int exponent = 0;

    double value() const { return sign == 0 ? 0.0 : sign * std::ldexp(1.0, exponent); }
};

// Nearest power of two in the log2 domain, ties toward the larger
// exponent. The tie test compares the normalized mantissa squared against
// 2, which avoids evaluating log2 near the rounding boundary.
inline Po2 po2_quantize(double x) {
    if (x == 0.0) return {0, 0};
    if (!std::isfinite(x)) throw std::invalid_argument("po2_quantize: non-finite input");
    const int sign = x < 0 ? -1 : 1;
    int e2 = 0;
    double m = std::frexp(std::fabs(x), &e2);  // m in [0.5, 1)
    // Normalize to mant in [1, 2) with exponent e2 - 1.
    double mant = 2.0 * m;
    int e = e2 - 1;
    if (mant * mant >= 2.0) ++e;
    return {sign, e};
}

// a * (sign * 2^exponent) by mantissa negation and shift, rounding to
// nearest (ties away from zero) and saturating in a's format. Equals
// quantize(value(a) * value(p), a.fmt) for every representable input.
inline Fixed shift_mul(const Fixed& a, const Po2& p) {
    if (p.sign == 0) return {0, a.fmt};
    const std::int64_t m = p.sign < 0 ? -a.mantissa : a.mantissa;
    return requantize(m, a.fmt.frac_bits - p.exponent, a.fmt);
}

}  // namespace estrain
