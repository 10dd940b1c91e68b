#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace sva {

using Rational = mpq_class;

inline Rational rat(long num, long den = 1) {
    if (den == 0) throw std::invalid_argument("rational with zero denominator");
    Rational r(num, den);
    r.canonicalize();
    return r;
}

inline Rational factorial(int n) {
    if (n < 0) throw std::invalid_argument("factorial of negative integer");
    Rational r = 1;
    for (int k = 2; k <= n; ++k) r *= k;
    return r;
}

/// Gaussian rational a + b*i with exact rational parts.
struct Scalar {
    Rational re;
    Rational im;

    Scalar() : re(0), im(0) {}
    Scalar(long n) : re(n), im(0) {}
    Scalar(Rational r) : re(std::move(r)), im(0) {}
    Scalar(Rational r, Rational i) : re(std::move(r)), im(std::move(i)) {}

    static Scalar i() { return Scalar(Rational(0), Rational(1)); }

    bool is_zero() const { return re == 0 && im == 0; }
    bool is_one() const { return re == 1 && im == 0; }

    Scalar conj() const { return Scalar(re, -im); }

    Scalar operator-() const { return Scalar(-re, -im); }
    Scalar& operator+=(const Scalar& o) {
        re += o.re;
        im += o.im;
        return *this;
    }
    Scalar& operator-=(const Scalar& o) {
        re -= o.re;
        im -= o.im;
        return *this;
    }
    Scalar& operator*=(const Scalar& o) {
        Rational r = re * o.re - im * o.im;
        Rational i = re * o.im + im * o.re;
        re = std::move(r);
        im = std::move(i);
        return *this;
    }
    friend Scalar operator+(Scalar a, const Scalar& b) { return a += b; }
    friend Scalar operator-(Scalar a, const Scalar& b) { return a -= b; }
    friend Scalar operator*(Scalar a, const Scalar& b) { return a *= b; }
    friend Scalar operator/(const Scalar& a, const Scalar& b) {
        Rational n = b.re * b.re + b.im * b.im;
        if (n == 0) throw std::domain_error("division by zero scalar");
        return Scalar((a.re * b.re + a.im * b.im) / n, (a.im * b.re - a.re * b.im) / n);
    }
    friend bool operator==(const Scalar& a, const Scalar& b) { return a.re == b.re && a.im == b.im; }
    friend bool operator!=(const Scalar& a, const Scalar& b) { return !(a == b); }
};

inline std::string to_string(const Rational& r) {
    std::ostringstream os;
    os << r;
    return os.str();
}

/// Renders e.g. "0", "3", "-1/2", "i", "-i/3", "1+i", "2/3-5i".
inline std::string to_string(const Scalar& s) {
    if (s.is_zero()) return "0";
    std::string out;
    if (s.re != 0) out = to_string(s.re);
    if (s.im != 0) {
        Rational a = abs(s.im);
        std::string imag = (a == 1) ? "i" : to_string(Rational(a.get_num())) + "i";
        if (a.get_den() != 1) imag += "/" + to_string(Rational(a.get_den()));
        if (s.im < 0)
            out += "-" + imag;
        else
            out += out.empty() ? imag : "+" + imag;
    }
    return out;
}

inline std::ostream& operator<<(std::ostream& os, const Scalar& s) { return os << to_string(s); }

}  // namespace sva
