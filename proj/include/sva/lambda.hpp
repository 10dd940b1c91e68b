#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "scalar.hpp"

namespace sva {

// Polynomial in the odd pair (lambda, chi), chi^2 = -lambda, with module
// coefficients written to the right of the monomial.  The entry at (j, J)
// is the full polynomial coefficient of lambda^j chi^J; mode coefficients
// a_{(j|J)} b are recovered as j! times the entry.
template <class V>
struct LambdaPoly {
    std::map<std::pair<int, int>, V> t;

    bool is_zero() const { return t.empty(); }

    void add(int j, int J, const V& v) {
        if (v.is_zero()) return;
        auto key = std::make_pair(j, J);
        auto it = t.find(key);
        if (it == t.end()) {
            t.emplace(key, v);
        } else {
            it->second = it->second + v;
            if (it->second.is_zero()) t.erase(it);
        }
    }

    LambdaPoly& operator+=(const LambdaPoly& o) {
        for (auto& [k, v] : o.t) add(k.first, k.second, v);
        return *this;
    }
    friend LambdaPoly operator+(LambdaPoly a, const LambdaPoly& b) { return a += b; }

    template <class F>
    LambdaPoly map_values(F&& f) const {
        LambdaPoly r;
        for (auto& [k, v] : t) r.add(k.first, k.second, f(v));
        return r;
    }

    LambdaPoly scaled(const Scalar& c) const {
        if (c.is_zero()) return {};
        return map_values([&](const V& v) { return v.scaled(c); });
    }

    friend bool operator==(const LambdaPoly& a, const LambdaPoly& b) {
        return a.t == b.t;
    }
};

// multiply by lambda on the left
template <class V>
LambdaPoly<V> lp_mul_lambda(const LambdaPoly<V>& p) {
    LambdaPoly<V> r;
    for (auto& [k, v] : p.t) r.add(k.first + 1, k.second, v);
    return r;
}

// multiply by chi on the left: chi * chi = -lambda
template <class V>
LambdaPoly<V> lp_mul_chi(const LambdaPoly<V>& p) {
    LambdaPoly<V> r;
    for (auto& [k, v] : p.t) {
        if (k.second == 0) r.add(k.first, 1, v);
        else r.add(k.first + 1, 0, v.scaled(Scalar(-1)));
    }
    return r;
}

// chi-multiplication with the opposite square sign.  Stripping the odd
// translation off the second bracket slot produces this variant; pairing
// it with lp_apply_S squares to (T + lambda) instead of (T - lambda).
template <class V>
LambdaPoly<V> lp_mul_chi_dual(const LambdaPoly<V>& p) {
    LambdaPoly<V> r;
    for (auto& [k, v] : p.t) {
        if (k.second == 0) r.add(k.first, 1, v);
        else r.add(k.first + 1, 0, v);
    }
    return r;
}

// apply the odd derivation S under the monomials: S picks up (-1)^J
template <class V, class SOp>
LambdaPoly<V> lp_apply_S(const LambdaPoly<V>& p, SOp&& S) {
    LambdaPoly<V> r;
    for (auto& [k, v] : p.t) {
        V sv = S(v);
        if (k.second == 1) sv = sv.scaled(Scalar(-1));
        r.add(k.first, k.second, sv);
    }
    return r;
}

template <class V, class TOp>
LambdaPoly<V> lp_apply_T(const LambdaPoly<V>& p, TOp&& T) {
    LambdaPoly<V> r;
    for (auto& [k, v] : p.t) r.add(k.first, k.second, T(v));
    return r;
}

// definite integral over the second SUSY variable from 0 to Lambda:
// Berezin in the odd part, then an ordinary integral in the even part.
// Only eta-carrying entries survive and the result is chi-free.
template <class V>
LambdaPoly<V> lp_integrate(const LambdaPoly<V>& p) {
    LambdaPoly<V> r;
    for (auto& [k, v] : p.t) {
        if (k.second != 1) continue;
        r.add(k.first + 1, 0, v.scaled(Scalar(Rational(1, k.first + 1))));
    }
    return r;
}

// integral from -nabla to 0: the value of sum_j (-1)^j T^{j+1}(v_j)/(j+1)
// over the chi-carrying entries.
template <class V, class TOp>
V lp_integrate_nabla(const LambdaPoly<V>& p, TOp&& T) {
    V acc;
    for (auto& [k, v] : p.t) {
        if (k.second != 1) continue;
        V w = v.scaled(Scalar(Rational((k.first % 2 == 0) ? 1 : -1, k.first + 1)));
        for (int m = 0; m <= k.first; ++m) w = T(w);
        acc = acc + w;
    }
    return acc;
}

inline Rational binom(int n, int k) {
    return factorial(n) / (factorial(k) * factorial(n - k));
}

// substitute Lambda -> -Lambda - nabla, the derivations acting on the
// coefficients from the left; sign_ab carries (-1)^{p(a) p(b)}.
template <class V, class TOp, class SOp>
LambdaPoly<V> lp_skew_substitute(const LambdaPoly<V>& p, int sign_ab, TOp&& T, SOp&& S) {
    LambdaPoly<V> r;
    Scalar outer(sign_ab);
    for (auto& [k, v] : p.t) {
        int j = k.first, E = k.second;
        Scalar sj((j % 2 == 0) ? 1 : -1);
        // iterated T images of v and of S(v)
        V tv = v;
        V sv;
        if (E == 1) sv = S(v);
        std::map<int, V> tpow, spow;
        tpow[0] = tv;
        if (E == 1) spow[0] = sv;
        for (int m = 1; m <= j; ++m) {
            tpow[m] = T(tpow[m - 1]);
            if (E == 1) spow[m] = T(spow[m - 1]);
        }
        for (int kk = 0; kk <= j; ++kk) {
            Scalar c = outer * sj * Scalar(binom(j, kk));
            if (E == 0) {
                r.add(kk, 0, tpow[j - kk].scaled(c));
            } else {
                r.add(kk, 0, spow[j - kk].scaled(-c));
                r.add(kk, 1, tpow[j - kk].scaled(-c));
            }
        }
    }
    return r;
}

// mode coefficient a_{(j|J)} b = j! * polynomial entry
template <class V>
V lp_coeff(const LambdaPoly<V>& p, int j, int J) {
    auto it = p.t.find({j, J});
    if (it == p.t.end()) return V{};
    return it->second.scaled(Scalar(factorial(j)));
}

template <class V>
std::string to_string(const LambdaPoly<V>& p) {
    if (p.is_zero()) return "0";
    std::string out;
    for (auto& [k, v] : p.t) {
        if (!out.empty()) out += "  +  ";
        std::string mono;
        for (int m = 0; m < k.first; ++m) mono += "L";
        if (k.second) mono += "X";
        if (mono.empty()) mono = "1";
        out += mono + "*(" + to_string(v) + ")";
    }
    return out;
}

// Polynomial in two SUSY pairs (lambda, chi) and (gamma, eta); the odd
// variables anticommute with each other, canonical monomial order is
// lambda^a chi^A gamma^b eta^B with the coefficient on the right.
template <class V>
struct BiLambdaPoly {
    struct Key {
        int a, A, b, B;
        auto operator<=>(const Key&) const = default;
    };
    std::map<Key, V> t;

    bool is_zero() const { return t.empty(); }

    void add(int a, int A, int b, int B, const V& v) {
        if (v.is_zero()) return;
        Key key{a, A, b, B};
        auto it = t.find(key);
        if (it == t.end()) {
            t.emplace(key, v);
        } else {
            it->second = it->second + v;
            if (it->second.is_zero()) t.erase(it);
        }
    }

    BiLambdaPoly& operator+=(const BiLambdaPoly& o) {
        for (auto& [k, v] : o.t) add(k.a, k.A, k.b, k.B, v);
        return *this;
    }

    BiLambdaPoly scaled(const Scalar& c) const {
        BiLambdaPoly r;
        if (c.is_zero()) return r;
        for (auto& [k, v] : t) r.add(k.a, k.A, k.b, k.B, v.scaled(c));
        return r;
    }
};

// gamma^b eta^B times a Lambda-polynomial, reordered to canonical form:
// eta moving right past chi^K costs (-1)^{B K}.
template <class V>
void bi_insert_gamma_left(BiLambdaPoly<V>& out, int b, int B,
                          const LambdaPoly<V>& q, const Scalar& sign) {
    for (auto& [k, v] : q.t) {
        Scalar c = sign;
        if (B == 1 && k.second == 1) c = -c;
        out.add(k.first, k.second, b, B, v.scaled(c));
    }
}

// lambda^k chi^K times a Gamma-polynomial: already canonically ordered.
template <class V>
void bi_insert_lambda_left(BiLambdaPoly<V>& out, int k, int K,
                           const LambdaPoly<V>& q, const Scalar& sign) {
    for (auto& [g, v] : q.t) out.add(k, K, g.first, g.second, v.scaled(sign));
}

// lambda^j chi^J times the substitution Theta -> Lambda + Gamma of a
// Theta-polynomial; an odd prefactor chi acts by the chi^2 = -lambda rule.
template <class V>
void bi_insert_shifted(BiLambdaPoly<V>& out, int j, int J,
                       const LambdaPoly<V>& q, const Scalar& sign) {
    for (auto& [k, v] : q.t) {
        int m = k.first, M = k.second;
        for (int i = 0; i <= m; ++i) {
            Scalar c = sign * Scalar(binom(m, i));
            // (lambda + gamma)^m -> C(m,i) lambda^i gamma^{m-i}
            // (chi + eta)^M contributes a chi-branch and an eta-branch
            struct Part { int A, B; };
            std::vector<Part> parts;
            if (M == 0) parts.push_back({0, 0});
            else { parts.push_back({1, 0}); parts.push_back({0, 1}); }
            for (auto pt : parts) {
                int la = i, A = pt.A, gb = m - i, B = pt.B;
                Scalar cc = c;
                if (J == 1) {
                    // chi * (lambda^la chi^A ...) from the left
                    if (A == 0) { A = 1; }
                    else { A = 0; la += 1; cc = -cc; }
                }
                out.add(la + j, A, gb, B, v.scaled(cc));
            }
        }
    }
}

template <class V>
std::string to_string(const BiLambdaPoly<V>& p) {
    if (p.is_zero()) return "0";
    std::string out;
    for (auto& [k, v] : p.t) {
        if (!out.empty()) out += "  +  ";
        std::string mono;
        for (int m = 0; m < k.a; ++m) mono += "L";
        if (k.A) mono += "X";
        for (int m = 0; m < k.b; ++m) mono += "G";
        if (k.B) mono += "E";
        if (mono.empty()) mono = "1";
        out += mono + "*(" + to_string(v) + ")";
    }
    return out;
}

}  // namespace sva
