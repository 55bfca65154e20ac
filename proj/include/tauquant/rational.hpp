#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "tauquant/errors.hpp"

namespace tauq {

namespace detail {

using int128 = __int128;

inline int128 abs128(int128 v) { return v < 0 ? -v : v; }

inline int128 gcd128(int128 a, int128 b) {
    a = abs128(a);
    b = abs128(b);
    while (b != 0) {
        int128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

inline int128 checked_add(int128 a, int128 b) {
    int128 r;
    if (__builtin_add_overflow(a, b, &r)) throw NumericalError("rational overflow (add)");
    return r;
}

inline int128 checked_mul(int128 a, int128 b) {
    int128 r;
    if (__builtin_mul_overflow(a, b, &r)) throw NumericalError("rational overflow (mul)");
    return r;
}

inline std::string int128_to_string(int128 v) {
    if (v == 0) return "0";
    bool neg = v < 0;
    unsigned __int128 u = neg ? static_cast<unsigned __int128>(-(v + 1)) + 1
                              : static_cast<unsigned __int128>(v);
    std::string s;
    while (u != 0) {
        s.insert(s.begin(), static_cast<char>('0' + static_cast<int>(u % 10)));
        u /= 10;
    }
    if (neg) s.insert(s.begin(), '-');
    return s;
}

}  // namespace detail

// Exact rational with 128-bit numerator/denominator and overflow detection.
class Rational {
public:
    Rational() : num_(0), den_(1) {}
    Rational(long long n) : num_(n), den_(1) {}
    Rational(long long n, long long d) : num_(n), den_(d) { normalize(); }

    static Rational from_int128(detail::int128 n, detail::int128 d) {
        Rational r;
        r.num_ = n;
        r.den_ = d;
        r.normalize();
        return r;
    }

    // Every finite double is dyadic, so this conversion is exact.
    static Rational from_double(double v) {
        if (!std::isfinite(v)) throw NumericalError("non-finite value has no rational form");
        if (v == 0.0) return Rational(0);
        int e = 0;
        double m = std::frexp(v, &e);  // v = m * 2^e, |m| in [0.5, 1)
        auto mant = static_cast<long long>(std::ldexp(m, 53));
        int shift = e - 53;
        detail::int128 num = mant, den = 1;
        if (shift >= 0) {
            if (shift > 73) throw NumericalError("double too large for exact rational");
            num <<= shift;
        } else {
            if (-shift > 126) throw NumericalError("double too small for exact rational");
            den <<= -shift;
        }
        return from_int128(num, den);
    }

    detail::int128 num() const { return num_; }
    detail::int128 den() const { return den_; }

    bool is_zero() const { return num_ == 0; }
    bool is_integer() const { return den_ == 1; }

    Rational operator-() const { return from_int128(-num_, den_); }

    friend Rational operator+(const Rational& a, const Rational& b) {
        using namespace detail;
        int128 g = gcd128(a.den_, b.den_);
        int128 da = a.den_ / g;
        int128 db = b.den_ / g;
        int128 n = checked_add(checked_mul(a.num_, db), checked_mul(b.num_, da));
        return from_int128(n, checked_mul(a.den_, db));
    }

    friend Rational operator-(const Rational& a, const Rational& b) { return a + (-b); }

    friend Rational operator*(const Rational& a, const Rational& b) {
        using namespace detail;
        int128 g1 = gcd128(a.num_, b.den_);
        int128 g2 = gcd128(b.num_, a.den_);
        return from_int128(checked_mul(a.num_ / g1, b.num_ / g2),
                           checked_mul(a.den_ / g2, b.den_ / g1));
    }

    friend Rational operator/(const Rational& a, const Rational& b) {
        if (b.num_ == 0) throw NumericalError("rational division by zero");
        return a * Rational::from_int128(b.den_, b.num_);
    }

    Rational& operator+=(const Rational& o) { return *this = *this + o; }
    Rational& operator-=(const Rational& o) { return *this = *this - o; }
    Rational& operator*=(const Rational& o) { return *this = *this * o; }
    Rational& operator/=(const Rational& o) { return *this = *this / o; }

    bool operator==(const Rational& o) const { return num_ == o.num_ && den_ == o.den_; }
    bool operator!=(const Rational& o) const { return !(*this == o); }
    bool operator<(const Rational& o) const {
        return detail::checked_mul(num_, o.den_) < detail::checked_mul(o.num_, den_);
    }

    double to_double() const {
        return static_cast<double>(num_) / static_cast<double>(den_);
    }

    std::string to_string() const {
        std::string s = detail::int128_to_string(num_);
        if (den_ != 1) s += "/" + detail::int128_to_string(den_);
        return s;
    }

    // Parses "p", "-p", "p/q".
    static Rational parse(const std::string& text) {
        auto slash = text.find('/');
        try {
            if (slash == std::string::npos) return Rational(std::stoll(text));
            long long n = std::stoll(text.substr(0, slash));
            long long d = std::stoll(text.substr(slash + 1));
            return Rational(n, d);
        } catch (const std::exception&) {
            throw ValidationError("bad rational literal: " + text);
        }
    }

private:
    void normalize() {
        if (den_ == 0) throw NumericalError("rational with zero denominator");
        if (den_ < 0) {
            num_ = -num_;
            den_ = -den_;
        }
        detail::int128 g = detail::gcd128(num_, den_);
        if (g > 1) {
            num_ /= g;
            den_ /= g;
        }
        if (num_ == 0) den_ = 1;
    }

    detail::int128 num_;
    detail::int128 den_;
};

}  // namespace tauq
