#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "backend.hpp"
#include "fields.hpp"
#include "lambda.hpp"

namespace sva {

// Classical one-variable bracket layer over the component letters of the
// free superfields.  Each coordinate contributes an even pair b^i (the
// coordinate field) and a_i (its weight-one conjugate) and an odd pair
// phi^i, psi_i.  Nontrivial pairings:
//   [phi^i_l psi_j] = [psi_j_l phi^i] = [a_j_l b^i] = delta,
//   [b^i_l a_j] = -delta, [a_i_l f] = f_{,i}, [f_l a_i] = -f_{,i}.

enum class CFam { B, A, Phi, Psi };

struct CGen {
    CFam fam = CFam::B;
    Idx idx{IndexClass::Real, 1};
    int k = 0;  // T count

    auto operator<=>(const CGen&) const = default;

    int parity() const { return (fam == CFam::Phi || fam == CFam::Psi) ? 1 : 0; }

    CGen applied_T() const {
        CGen g = *this;
        g.k += 1;
        return g;
    }
    // the odd square root of T induced on components
    CGen applied_Sp() const {
        CGen g = *this;
        switch (fam) {
            case CFam::B: g.fam = CFam::Phi; break;
            case CFam::Phi: g.fam = CFam::B; g.k += 1; break;
            case CFam::Psi: g.fam = CFam::A; break;
            case CFam::A: g.fam = CFam::Psi; g.k += 1; break;
        }
        return g;
    }
};

inline CGen cb(Idx i) { return CGen{CFam::B, i, 0}; }
inline CGen ca(Idx i) { return CGen{CFam::A, i, 0}; }
inline CGen cphi(Idx i) { return CGen{CFam::Phi, i, 0}; }
inline CGen cpsi(Idx i) { return CGen{CFam::Psi, i, 0}; }

inline std::string to_string(const CGen& g) {
    std::string out;
    for (int m = 0; m < g.k; ++m) out += "T";
    switch (g.fam) {
        case CFam::B: out += "b"; break;
        case CFam::A: out += "a"; break;
        case CFam::Phi: out += "phi"; break;
        case CFam::Psi: out += "psi"; break;
    }
    out += "[" + to_string(g.idx) + "]";
    return out;
}

using CWord = std::vector<CGen>;

inline int cword_parity(const CWord& w) {
    int p = 0;
    for (auto& g : w) p ^= g.parity();
    return p;
}

// Sum of canonical normally ordered component words; a term (c, w1..wm)
// denotes the left-nested product (((c w1) w2) ... wm).
class CompExpr {
  public:
    using Map = std::map<CWord, CoefficientExpr>;

    CompExpr() = default;
    explicit CompExpr(const CoefficientExpr& c) {
        if (!c.is_zero()) terms_[CWord{}] = c;
    }

    static CompExpr gen(const CGen& g, const CoefficientExpr& c = CoefficientExpr(Scalar(1))) {
        CompExpr e;
        if (!c.is_zero()) e.terms_[CWord{g}] = c;
        return e;
    }
    static CompExpr term(const CoefficientExpr& c, CWord w) {
        CompExpr e;
        if (!c.is_zero()) e.terms_[std::move(w)] = c;
        return e;
    }

    bool is_zero() const { return terms_.empty(); }
    const Map& terms() const { return terms_; }

    void add_term(const CWord& w, const CoefficientExpr& c) {
        if (c.is_zero()) return;
        auto it = terms_.find(w);
        if (it == terms_.end()) {
            terms_.emplace(w, c);
        } else {
            it->second += c;
            if (it->second.is_zero()) terms_.erase(it);
        }
    }

    CompExpr& operator+=(const CompExpr& o) {
        for (auto& [w, c] : o.terms_) add_term(w, c);
        return *this;
    }
    CompExpr& operator-=(const CompExpr& o) {
        for (auto& [w, c] : o.terms_) add_term(w, -c);
        return *this;
    }
    friend CompExpr operator+(CompExpr a, const CompExpr& b) { return a += b; }
    friend CompExpr operator-(CompExpr a, const CompExpr& b) { return a -= b; }
    CompExpr operator-() const {
        CompExpr r;
        for (auto& [w, c] : terms_) r.terms_.emplace(w, -c);
        return r;
    }

    CompExpr scaled(const Scalar& s) const {
        CompExpr r;
        if (s.is_zero()) return r;
        for (auto& [w, c] : terms_) r.terms_.emplace(w, c * s);
        return r;
    }

    friend bool operator==(const CompExpr& a, const CompExpr& b) {
        return a.terms_ == b.terms_;
    }

    bool homogeneous(int* parity_out = nullptr) const {
        int p = -1;
        for (auto& [w, c] : terms_) {
            int q = cword_parity(w);
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

inline std::string to_string(const CompExpr& e) {
    if (e.is_zero()) return "0";
    std::string out;
    bool first = true;
    for (auto& [w, c] : e.terms()) {
        std::string cs = to_string(c);
        std::string t;
        if (w.empty()) {
            t = cs;
        } else {
            if (cs == "1") t = "";
            else if (cs == "-1") t = "-";
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

// polynomial in a single even parameter with CompExpr coefficients
struct CompPoly {
    std::map<int, CompExpr> t;

    bool is_zero() const { return t.empty(); }

    void add(int j, const CompExpr& v) {
        if (v.is_zero()) return;
        auto it = t.find(j);
        if (it == t.end()) {
            t.emplace(j, v);
        } else {
            it->second = it->second + v;
            if (it->second.is_zero()) t.erase(it);
        }
    }

    CompPoly& operator+=(const CompPoly& o) {
        for (auto& [j, v] : o.t) add(j, v);
        return *this;
    }

    CompPoly scaled(const Scalar& s) const {
        CompPoly r;
        if (s.is_zero()) return r;
        for (auto& [j, v] : t) r.t.emplace(j, v.scaled(s));
        return r;
    }
};

// two even parameters, for the Jacobi identity
struct CompBiPoly {
    std::map<std::pair<int, int>, CompExpr> t;

    void add(int i, int m, const CompExpr& v) {
        if (v.is_zero()) return;
        auto key = std::make_pair(i, m);
        auto it = t.find(key);
        if (it == t.end()) {
            t.emplace(key, v);
        } else {
            it->second = it->second + v;
            if (it->second.is_zero()) t.erase(it);
        }
    }

    CompBiPoly& operator+=(const CompBiPoly& o) {
        for (auto& [k, v] : o.t) add(k.first, k.second, v);
        return *this;
    }

    CompBiPoly scaled(const Scalar& s) const {
        CompBiPoly r;
        if (s.is_zero()) return r;
        for (auto& [k, v] : t) r.t.emplace(k, v.scaled(s));
        return r;
    }
};

class CompAlgebra {
  public:
    explicit CompAlgebra(Backend b) : bk_(std::move(b)) {}

    const Backend& backend() const { return bk_; }
    const IndexContext& ctx() const { return bk_.ctx; }

    // ---- derivations ---------------------------------------------------

    CompExpr T(const CompExpr& x) {
        CompExpr out;
        for (auto& [w, c] : x.terms()) {
            for (size_t i = 0; i < w.size(); ++i) {
                CWord ww = w;
                ww[i] = ww[i].applied_T();
                out += rebuild(c, ww);
            }
            for (auto& ix : bk_.ctx.all()) {
                CoefficientExpr ck = bk_.diff(c, ix);
                if (ck.is_zero()) continue;
                CWord ww;
                ww.push_back(CGen{CFam::B, ix, 1});
                ww.insert(ww.end(), w.begin(), w.end());
                out += rebuild(ck, ww);
            }
        }
        return out;
    }

    // odd derivation squaring to T; the component image of the odd
    // translation on superfields
    CompExpr Sp(const CompExpr& x) {
        CompExpr out;
        for (auto& [w, c] : x.terms()) {
            int prefix = 0;
            for (size_t i = 0; i < w.size(); ++i) {
                CWord ww = w;
                ww[i] = ww[i].applied_Sp();
                CompExpr part = rebuild(c, ww);
                if (prefix) part = part.scaled(Scalar(-1));
                out += part;
                prefix ^= w[i].parity();
            }
            for (auto& ix : bk_.ctx.all()) {
                CoefficientExpr ck = bk_.diff(c, ix);
                if (ck.is_zero()) continue;
                CWord ww;
                ww.push_back(cphi(ix));
                ww.insert(ww.end(), w.begin(), w.end());
                out += rebuild(ck, ww);
            }
        }
        return out;
    }

    CompExpr rebuild(const CoefficientExpr& c, const CWord& letters) {
        CompExpr x(bk_.normalize(c));
        for (auto& g : letters) x = mul_gen(x, g);
        return x;
    }

    // ---- normally ordered product --------------------------------------

    CompExpr nop(const CompExpr& x, const CompExpr& y) {
        CompExpr out;
        for (auto& [wx, cx] : x.terms())
            for (auto& [wy, cy] : y.terms()) out += nop_term(cx, wx, cy, wy);
        return out;
    }

    CompExpr mul_gen(const CompExpr& x, const CGen& g) {
        CompExpr out;
        for (auto& [w, c] : x.terms()) out += mul_term_gen(c, w, g);
        return out;
    }

    // ---- the lambda bracket --------------------------------------------

    CompPoly bracket(const CompExpr& a, const CompExpr& b) {
        CompPoly out;
        for (auto& [wa, ca] : a.terms())
            for (auto& [wb, cb] : b.terms()) out += br_term(ca, wa, cb, wb);
        return out;
    }

    // [a_l [b_m c]] - [[a_l b]_{l+m} c] - (-1)^{ab} [b_m [a_l c]]
    CompBiPoly jacobi_defect(const CompExpr& a, const CompExpr& b, const CompExpr& c) {
        int pa = 0, pb = 0;
        a.homogeneous(&pa);
        b.homogeneous(&pb);
        CompBiPoly out;

        CompPoly bc = bracket(b, c);
        for (auto& [m, d] : bc.t) {
            CompPoly q = bracket(a, d);
            for (auto& [j, v] : q.t) out.add(j, m, v);
        }

        CompPoly ab = bracket(a, b);
        for (auto& [j, x] : ab.t) {
            CompPoly q = bracket(x, c);
            for (auto& [m, w] : q.t) {
                for (int i = 0; i <= m; ++i)
                    out.add(j + i, m - i, w.scaled(-Scalar(binom(m, i))));
            }
        }

        CompPoly ac = bracket(a, c);
        Scalar s3((pa && pb) ? 1 : -1);
        for (auto& [j, v] : ac.t) {
            CompPoly q = bracket(b, v);
            for (auto& [m, w] : q.t) out.add(j, m, w.scaled(s3));
        }
        return out;
    }

    // ab - (-1)^{ab} ba as the integral of the bracket from -T to 0
    CompExpr comm_defect(const CompExpr& a, const CompExpr& b) {
        int pa = 0, pb = 0;
        a.homogeneous(&pa);
        b.homogeneous(&pb);
        CompExpr lhs = nop(a, b);
        CompExpr rhs = nop(b, a);
        if (pa && pb) lhs += rhs;
        else lhs -= rhs;
        return lhs - integrate_T(bracket(a, b));
    }

    CompExpr integrate_T(const CompPoly& p) {
        CompExpr out;
        for (auto& [j, v] : p.t) {
            CompExpr r = v;
            for (int m = 0; m <= j; ++m) r = T(r);
            r = r.scaled(Scalar(Rational((j % 2 == 0) ? 1 : -1, j + 1)));
            out += r;
        }
        return out;
    }

    bool eq(const CompExpr& a, const CompExpr& b) {
        CompExpr d = a - b;
        for (auto& [w, c] : d.terms())
            if (!bk_.normalize(c).is_zero()) return false;
        return true;
    }

    size_t memo_size() const { return memo_.size(); }

  private:
    Backend bk_;
    std::map<std::string, CompPoly> memo_;
    long depth_ = 0;

    struct Guard {
        CompAlgebra* a;
        explicit Guard(CompAlgebra* al) : a(al) {
            if (++a->depth_ > 20000)
                throw budget_error("component bracket recursion depth exceeded");
        }
        ~Guard() { --a->depth_; }
    };

    static std::string word_key(const CWord& w) {
        std::string s;
        for (auto& g : w) s += to_string(g);
        return s;
    }

    // ---- product internals ---------------------------------------------

    CompExpr nop_term(const CoefficientExpr& cx, const CWord& wx,
                      const CoefficientExpr& cy, const CWord& wy) {
        Guard g(this);
        if (cx.is_zero() || cy.is_zero()) return {};
        if (wx.empty() && wy.empty()) {
            return CompExpr(bk_.mul(cx, cy));
        }
        if (wy.empty()) {
            if (cy.is_scalar())
                return CompExpr::term(cy.scalar_value() * cx, wx);
            CompExpr out = nop_term(cy, CWord{}, cx, wx);
            out += integrate_T(br_term(cx, wx, cy, CWord{}));
            return out;
        }
        if (wx.empty() && cx.is_scalar()) {
            return CompExpr::term(cx.scalar_value() * cy, wy);
        }
        CWord wyp(wy.begin(), wy.end() - 1);
        CGen yk = wy.back();
        CompExpr A = nop_term(cx, wx, cy, wyp);
        CompExpr out = mul_gen(A, yk);
        out -= qa_corr(CompExpr::term(cx, wx), CompExpr::term(cy, wyp), yk);
        return out;
    }

    CompExpr qa_corr(const CompExpr& A, const CompExpr& B, const CGen& cg) {
        int pA = 0, pB = 0;
        A.homogeneous(&pA);
        B.homogeneous(&pB);
        CompExpr cexp = CompExpr::gen(cg);
        CompExpr out;
        CompPoly brBc = bracket(B, cexp);
        for (auto& [j, v] : brBc.t) {
            out += nop(T_power_scaled(A, j + 1), v.scaled(Scalar(factorial(j))));
        }
        CompPoly brAc = bracket(A, cexp);
        for (auto& [j, v] : brAc.t) {
            CompExpr part = nop(T_power_scaled(B, j + 1), v.scaled(Scalar(factorial(j))));
            if (pA && pB) part = part.scaled(Scalar(-1));
            out += part;
        }
        return out;
    }

    CompExpr T_power_scaled(const CompExpr& x, int m) {
        CompExpr r = x;
        for (int i = 0; i < m; ++i) r = T(r);
        return r.scaled(Scalar(Rational(1) / factorial(m)));
    }

    CompExpr mul_term_gen(const CoefficientExpr& c, const CWord& w, const CGen& g) {
        Guard gu(this);
        if (w.empty()) return CompExpr::term(c, CWord{g});
        CGen um = w.back();
        if (um < g || (um == g && g.parity() == 0)) {
            CWord ww = w;
            ww.push_back(g);
            return CompExpr::term(c, ww);
        }
        CWord up(w.begin(), w.end() - 1);
        CompExpr Aexp = CompExpr::term(c, up);
        if (um == g) {
            // odd square word vanishes; only the nesting correction survives
            return qa_corr(Aexp, CompExpr::gen(um), g);
        }
        int s = (um.parity() && g.parity()) ? -1 : 1;
        CompExpr main = mul_gen(mul_term_gen(c, up, g), um).scaled(Scalar(s));
        CompExpr corrB = qa_corr(Aexp, CompExpr::gen(g), um).scaled(Scalar(-s));
        CompExpr inter = integrate_T(
            br_term(CoefficientExpr(Scalar(1)), CWord{um}, CoefficientExpr(Scalar(1)), CWord{g}));
        CompExpr mid = nop(Aexp, inter);
        CompExpr corrA = qa_corr(Aexp, CompExpr::gen(um), g);
        return main + corrB + mid + corrA;
    }

    // ---- bracket internals ---------------------------------------------

    CompPoly br_term(const CoefficientExpr& cx, const CWord& wx,
                     const CoefficientExpr& cy, const CWord& wy) {
        Guard g(this);
        if (cx.is_zero() || cy.is_zero()) return {};
        std::string key = to_string(cx) + "\x01" + word_key(wx) + "\x01" +
                          to_string(cy) + "\x01" + word_key(wy);
        auto mit = memo_.find(key);
        if (mit != memo_.end()) return mit->second;
        CompPoly out = br_term_impl(cx, wx, cy, wy);
        memo_.emplace(std::move(key), out);
        return out;
    }

    CompPoly br_term_impl(const CoefficientExpr& cx, const CWord& wx,
                          const CoefficientExpr& cy, const CWord& wy) {
        bool right_complex = wy.size() >= 2 || (wy.size() == 1 && !cy.is_scalar());
        if (right_complex) return br_wick(cx, wx, cy, wy);

        if (wy.size() == 1 && wy[0].k > 0) {
            CGen inner = wy[0];
            inner.k -= 1;
            CompPoly p = br_term(cx, wx, cy, CWord{inner});
            CompPoly out;
            for (auto& [j, v] : p.t) {
                out.add(j, T(v));
                out.add(j + 1, v);
            }
            return out;
        }

        if (wy.empty() && cy.is_scalar()) return {};
        if (wx.empty() && cx.is_scalar()) return {};

        bool left_single_plain = (wx.size() == 1 && cx.is_scalar());
        if (left_single_plain && wx[0].k > 0) {
            CGen inner = wx[0];
            inner.k -= 1;
            CompPoly p = br_term(cx, CWord{inner}, cy, wy);
            CompPoly out;
            for (auto& [j, v] : p.t) out.add(j + 1, v.scaled(Scalar(-1)));
            return out;
        }

        bool left_base = left_single_plain || (wx.empty() && !cx.is_scalar());
        if (!left_base) {
            // left composite: classical skew, then substitute -lambda - T
            int pa = cword_parity(wx), pb = cword_parity(wy);
            CompPoly q = br_term(cy, wy, cx, wx);
            Scalar sg((pa && pb) ? 1 : -1);
            CompPoly out;
            for (auto& [j, v] : q.t) {
                CompExpr tv = v;
                for (int m = j; m >= 0; --m) {
                    Scalar cc = sg * Scalar(Rational((j % 2 == 0) ? 1 : -1) * binom(j, m));
                    out.add(m, tv.scaled(cc));
                    if (m > 0) tv = T(tv);
                }
            }
            return out;
        }

        return br_base(cx, wx, cy, wy);
    }

    CompPoly br_wick(const CoefficientExpr& cx, const CWord& wx,
                     const CoefficientExpr& cy, const CWord& wy) {
        CWord wyp(wy.begin(), wy.end() - 1);
        CGen yk = wy.back();
        int pa = cword_parity(wx);
        int pb = cword_parity(wyp);
        CompPoly P = br_term(cx, wx, cy, wyp);
        CompPoly R = br_term(cx, wx, CoefficientExpr(Scalar(1)), CWord{yk});
        CompPoly out;
        for (auto& [j, v] : P.t) out.add(j, mul_gen(v, yk));
        CompExpr bexp = CompExpr::term(cy, wyp);
        for (auto& [j, v] : R.t) {
            CompExpr t = nop(bexp, v);
            if (pa && pb) t = t.scaled(Scalar(-1));
            out.add(j, t);
        }
        CompExpr ykexp = CompExpr::gen(yk);
        for (auto& [j, v] : P.t) {
            CompPoly q = bracket(v, ykexp);
            for (auto& [m, w] : q.t)
                out.add(j + m + 1, w.scaled(Scalar(Rational(1, m + 1))));
        }
        return out;
    }

    CompPoly br_base(const CoefficientExpr& cx, const CWord& wx,
                     const CoefficientExpr& cy, const CWord& wy) {
        CompPoly out;
        if (wx.size() == 1 && wy.size() == 1) {
            const CGen &x = wx[0], &y = wy[0];
            if (x.idx == y.idx) {
                int v = 0;
                if (x.fam == CFam::Phi && y.fam == CFam::Psi) v = 1;
                else if (x.fam == CFam::Psi && y.fam == CFam::Phi) v = 1;
                else if (x.fam == CFam::A && y.fam == CFam::B) v = 1;
                else if (x.fam == CFam::B && y.fam == CFam::A) v = -1;
                if (v != 0)
                    out.add(0, CompExpr(CoefficientExpr(cx.scalar_value() * cy.scalar_value() *
                                                        Scalar(v))));
            }
            return out;
        }
        if (wx.size() == 1 && wy.empty()) {
            const CGen& x = wx[0];
            if (x.fam == CFam::A) {
                CoefficientExpr d = bk_.diff(cy, x.idx);
                out.add(0, CompExpr(d).scaled(cx.scalar_value()));
            }
            return out;
        }
        if (wx.empty() && wy.size() == 1) {
            const CGen& y = wy[0];
            if (y.fam == CFam::A) {
                CoefficientExpr d = bk_.diff(cx, y.idx);
                out.add(0, CompExpr(d).scaled(-cy.scalar_value()));
            }
            return out;
        }
        return out;
    }
};

// Bottom component of a superfield expression: each letter maps to its
// component letter (B -> b, SB -> phi, Psi -> psi, SPsi -> a, T passes
// through) and normally ordered words map to normally ordered words.
inline CompExpr comp_bottom(CompAlgebra& ca_, const FieldExpr& x) {
    CompExpr out;
    for (auto& [w, c] : x.terms()) {
        CompExpr t(ca_.backend().normalize(c));
        for (auto& g : w) {
            CGen m;
            m.idx = g.idx;
            m.k = g.k;
            if (g.fam == Fam::B) m.fam = g.s ? CFam::Phi : CFam::B;
            else m.fam = g.s ? CFam::A : CFam::Psi;
            t = ca_.mul_gen(t, m);
        }
        out += t;
    }
    return out;
}

}  // namespace sva
