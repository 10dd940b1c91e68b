#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "sva/scalar.hpp"
#include "sva/symbol.hpp"

namespace sva {

/// Commutative product of symbols, kept sorted.
using CoeffMonomial = std::vector<FunctionSymbol>;

/// Exact linear combination of symbol monomials.  This is the raw ring; all
/// backend-specific rewriting lives in Backend.
class CoefficientExpr {
public:
    using Map = std::map<CoeffMonomial, Scalar>;

    CoefficientExpr() = default;
    CoefficientExpr(Scalar s) {
        if (!s.is_zero()) terms_[{}] = std::move(s);
    }
    CoefficientExpr(long n) : CoefficientExpr(Scalar(n)) {}

    static CoefficientExpr symbol(FunctionSymbol s, Scalar c = Scalar(1)) {
        int sign = s.canonicalize();
        CoefficientExpr e;
        if (sign != 0 && !c.is_zero()) e.terms_[{std::move(s)}] = (sign < 0) ? -c : c;
        return e;
    }

    bool is_zero() const { return terms_.empty(); }
    bool is_scalar() const {
        return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.empty());
    }
    Scalar scalar_value() const {
        if (terms_.empty()) return Scalar(0);
        if (!is_scalar()) throw std::logic_error("coefficient is not a scalar");
        return terms_.begin()->second;
    }
    const Map& terms() const { return terms_; }

    void add_term(CoeffMonomial m, Scalar c) {
        if (c.is_zero()) return;
        std::sort(m.begin(), m.end());
        auto it = terms_.find(m);
        if (it == terms_.end()) {
            terms_.emplace(std::move(m), std::move(c));
        } else {
            it->second += c;
            if (it->second.is_zero()) terms_.erase(it);
        }
    }

    CoefficientExpr& operator+=(const CoefficientExpr& o) {
        for (const auto& [m, c] : o.terms_) add_term(m, c);
        return *this;
    }
    CoefficientExpr& operator-=(const CoefficientExpr& o) {
        for (const auto& [m, c] : o.terms_) add_term(m, -c);
        return *this;
    }
    friend CoefficientExpr operator+(CoefficientExpr a, const CoefficientExpr& b) { return a += b; }
    friend CoefficientExpr operator-(CoefficientExpr a, const CoefficientExpr& b) { return a -= b; }
    CoefficientExpr operator-() const {
        CoefficientExpr r;
        for (const auto& [m, c] : terms_) r.terms_[m] = -c;
        return r;
    }

    friend CoefficientExpr operator*(const CoefficientExpr& a, const CoefficientExpr& b) {
        CoefficientExpr r;
        for (const auto& [ma, ca] : a.terms_)
            for (const auto& [mb, cb] : b.terms_) {
                CoeffMonomial m = ma;
                m.insert(m.end(), mb.begin(), mb.end());
                r.add_term(std::move(m), ca * cb);
            }
        return r;
    }
    friend CoefficientExpr operator*(const Scalar& s, const CoefficientExpr& a) {
        CoefficientExpr r;
        if (s.is_zero()) return r;
        for (const auto& [m, c] : a.terms_) r.terms_[m] = s * c;
        return r;
    }

    friend bool operator==(const CoefficientExpr& a, const CoefficientExpr& b) {
        return a.terms_ == b.terms_;
    }

    /// Formal partial derivative: Leibniz over factors, scalars to zero.
    CoefficientExpr diff_raw(const Idx& d) const {
        CoefficientExpr r;
        for (const auto& [m, c] : terms_) {
            for (size_t k = 0; k < m.size(); ++k) {
                CoeffMonomial mm = m;
                mm[k].derivs.push_back(d);
                std::sort(mm[k].derivs.begin(), mm[k].derivs.end());
                r.add_term(std::move(mm), c);
            }
        }
        return r;
    }

    CoefficientExpr conjugated() const {
        CoefficientExpr r;
        for (const auto& [m, c] : terms_) {
            CoeffMonomial mm;
            Scalar sc = c.conj();
            bool dead = false;
            for (const auto& s : m) {
                FunctionSymbol cs = s.conjugated();
                int sign = cs.canonicalize();
                if (sign == 0) {
                    dead = true;
                    break;
                }
                if (sign < 0) sc = -sc;
                mm.push_back(std::move(cs));
            }
            if (!dead) r.add_term(std::move(mm), std::move(sc));
        }
        return r;
    }

    size_t size() const { return terms_.size(); }

    std::pair<CoeffMonomial, Scalar> pop_first() {
        auto it = terms_.begin();
        auto r = *it;
        terms_.erase(it);
        return r;
    }

private:
    Map terms_;
};

inline std::string to_string(const CoefficientExpr& e) {
    if (e.is_zero()) return "0";
    std::string out;
    for (const auto& [m, c] : e.terms()) {
        std::string t;
        if (m.empty()) {
            t = to_string(c);
        } else {
            bool plain_one = c.is_one();
            bool plain_minus = (c == -Scalar(1));
            if (!plain_one && !plain_minus) {
                std::string cs = to_string(c);
                if (c.re != 0 && c.im != 0) cs = "(" + cs + ")";
                t = cs + "*";
            } else if (plain_minus) {
                t = "-";
            }
            for (size_t k = 0; k < m.size(); ++k) {
                if (k) t += "*";
                t += to_string(m[k]);
            }
        }
        if (!out.empty() && t[0] != '-') out += "+";
        out += t;
    }
    return out;
}

}  // namespace sva
