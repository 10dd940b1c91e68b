#pragma once

#include <compare>
#include <map>
#include <string>
#include <vector>

#include "backend.hpp"
#include "coeff.hpp"

namespace sva {

enum class Fam { B, Psi };

// One generator letter: T^k S^s applied to a superfield of the family.
struct Gen {
    Fam fam = Fam::B;
    Idx idx{IndexClass::Real, 1};
    int k = 0;  // T count
    int s = 0;  // S applied (0 or 1); S^2 = T folds into k

    auto operator<=>(const Gen&) const = default;

    int parity() const { return ((fam == Fam::Psi ? 1 : 0) + s) & 1; }
    Rational weight() const {
        Rational w = (fam == Fam::Psi) ? Rational(1, 2) : Rational(0);
        w += k;
        if (s) w += Rational(1, 2);
        return w;
    }

    Gen applied_S() const {
        Gen g = *this;
        if (g.s == 0) g.s = 1;
        else { g.s = 0; g.k += 1; }
        return g;
    }
    Gen applied_T() const {
        Gen g = *this;
        g.k += 1;
        return g;
    }
};

inline Gen gB(Idx i) { return Gen{Fam::B, i, 0, 0}; }
inline Gen gPsi(Idx i) { return Gen{Fam::Psi, i, 0, 0}; }
inline Gen gSB(Idx i) { return Gen{Fam::B, i, 0, 1}; }
inline Gen gSPsi(Idx i) { return Gen{Fam::Psi, i, 0, 1}; }
inline Gen gTB(Idx i) { return Gen{Fam::B, i, 1, 0}; }
inline Gen gTPsi(Idx i) { return Gen{Fam::Psi, i, 1, 0}; }

inline std::string to_string(const Gen& g) {
    std::string out;
    for (int m = 0; m < g.k; ++m) out += "T";
    if (g.s) out += "S";
    out += (g.fam == Fam::B) ? "B" : "Psi";
    out += "[" + to_string(g.idx) + "]";
    return out;
}

using Word = std::vector<Gen>;

inline int word_parity(const Word& w) {
    int p = 0;
    for (auto& g : w) p ^= g.parity();
    return p;
}

inline Rational word_weight(const Word& w) {
    Rational r(0);
    for (auto& g : w) r += g.weight();
    return r;
}

// Sum of canonical normally ordered words with coefficient-ring entries.
// A term (c, w1..wm) denotes the left-nested product (((c w1) w2) ... wm);
// the empty word holds plain coefficient-ring elements.
class FieldExpr {
  public:
    using Map = std::map<Word, CoefficientExpr>;

    FieldExpr() = default;
    explicit FieldExpr(const CoefficientExpr& c) {
        if (!c.is_zero()) terms_[Word{}] = c;
    }

    static FieldExpr gen(const Gen& g, const CoefficientExpr& c = CoefficientExpr(Scalar(1))) {
        FieldExpr e;
        if (!c.is_zero()) e.terms_[Word{g}] = c;
        return e;
    }
    static FieldExpr term(const CoefficientExpr& c, Word w) {
        FieldExpr e;
        if (!c.is_zero()) e.terms_[std::move(w)] = c;
        return e;
    }

    bool is_zero() const { return terms_.empty(); }
    const Map& terms() const { return terms_; }

    void add_term(const Word& w, const CoefficientExpr& c) {
        if (c.is_zero()) return;
        auto it = terms_.find(w);
        if (it == terms_.end()) {
            terms_.emplace(w, c);
        } else {
            it->second += c;
            if (it->second.is_zero()) terms_.erase(it);
        }
    }

    FieldExpr& operator+=(const FieldExpr& o) {
        for (auto& [w, c] : o.terms_) add_term(w, c);
        return *this;
    }
    FieldExpr& operator-=(const FieldExpr& o) {
        for (auto& [w, c] : o.terms_) add_term(w, -c);
        return *this;
    }
    friend FieldExpr operator+(FieldExpr a, const FieldExpr& b) { return a += b; }
    friend FieldExpr operator-(FieldExpr a, const FieldExpr& b) { return a -= b; }
    FieldExpr operator-() const {
        FieldExpr r;
        for (auto& [w, c] : terms_) r.terms_.emplace(w, -c);
        return r;
    }

    FieldExpr scaled(const Scalar& s) const {
        FieldExpr r;
        if (s.is_zero()) return r;
        for (auto& [w, c] : terms_) r.terms_.emplace(w, c * s);
        return r;
    }

    friend bool operator==(const FieldExpr& a, const FieldExpr& b) {
        return a.terms_ == b.terms_;
    }

    // nonzero only when every term has the same parity
    bool homogeneous(int* parity_out = nullptr) const {
        int p = -1;
        for (auto& [w, c] : terms_) {
            int q = word_parity(w);
            if (p < 0) p = q;
            else if (p != q) return false;
        }
        if (parity_out) *parity_out = (p < 0 ? 0 : p);
        return true;
    }

    size_t size() const { return terms_.size(); }

  private:
    Map terms_;
};

inline std::string to_string(const FieldExpr& e) {
    if (e.is_zero()) return "0";
    std::string out;
    bool first = true;
    for (auto& [w, c] : e.terms()) {
        std::string cs = to_string(c);
        std::string t;
        if (w.empty()) {
            t = cs;
        } else {
            bool one = (cs == "1");
            bool minus_one = (cs == "-1");
            if (one) t = "";
            else if (minus_one) t = "-";
            else {
                if (c.size() > 1) t = "(" + cs + ")*";
                else t = cs + "*";
            }
            for (size_t i = 0; i < w.size(); ++i) {
                if (i) t += "*";
                t += to_string(w[i]);
            }
        }
        if (first) { out = t; first = false; }
        else if (!t.empty() && t[0] == '-') out += " - " + t.substr(1);
        else out += " + " + t;
    }
    return out;
}

}  // namespace sva
