/**
 * @file  rational.hpp
 * @brief Exact rational scalar type used for all symbolic constants.
 *
 * Structure constants, invariant coefficients and normalization data are kept
 * exact; floating point enters only at evaluation time.
 */
#ifndef EDS_RATIONAL_HPP
#define EDS_RATIONAL_HPP

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <string>

namespace eds {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline double to_double(const Rational& r) {
    return r.convert_to<double>();
}

inline Rational rational_pow(const Rational& base, int exponent) {
    if (exponent == 0) {
        return Rational(1);
    }
    Rational b = base;
    int n = exponent;
    if (n < 0) {
        b = Rational(1) / b;
        n = -n;
    }
    Rational acc(1);
    while (n > 0) {
        if (n & 1) {
            acc *= b;
        }
        b *= b;
        n >>= 1;
    }
    return acc;
}

/// gcd of two non-negative rationals: gcd of numerators over lcm of denominators.
inline Rational rational_gcd(const Rational& a, const Rational& b) {
    using boost::multiprecision::gcd;
    using boost::multiprecision::lcm;
    const BigInt gn = gcd(numerator(a), numerator(b));
    const BigInt ld = lcm(denominator(a), denominator(b));
    return Rational(gn, ld);
}

/// Exact square root if the rational is a perfect square; false otherwise.
inline bool rational_sqrt_exact(const Rational& v, Rational& out) {
    if (v < 0) {
        return false;
    }
    const BigInt n = numerator(v);
    const BigInt d = denominator(v);
    const BigInt sn = boost::multiprecision::sqrt(n);
    const BigInt sd = boost::multiprecision::sqrt(d);
    if (sn * sn == n && sd * sd == d) {
        out = Rational(sn, sd);
        return true;
    }
    return false;
}

inline std::string to_string(const Rational& r) {
    if (denominator(r) == 1) {
        return numerator(r).str();
    }
    return numerator(r).str() + "/" + denominator(r).str();
}

} // namespace eds

#endif // EDS_RATIONAL_HPP
