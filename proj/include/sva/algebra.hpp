#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "backend.hpp"
#include "fields.hpp"
#include "lambda.hpp"

namespace sva {

using FieldPoly = LambdaPoly<FieldExpr>;
using FieldBiPoly = BiLambdaPoly<FieldExpr>;

// The free superfield vertex algebra over a coefficient backend: families
// B (even, weight 0) and Psi (odd, weight 1/2) with [B^i_L Psi_j] =
// [Psi_j_L B^i] = delta^i_j, extended to functions of B by derivatives.
//
// All products and brackets return canonical forms: sorted normally
// ordered words with backend-normalized coefficients.
class Algebra {
  public:
    explicit Algebra(Backend b) : bk_(std::move(b)) {}

    const Backend& backend() const { return bk_; }
    const IndexContext& ctx() const { return bk_.ctx; }

    // ---- derivations ---------------------------------------------------

    FieldExpr T(const FieldExpr& x) {
        FieldExpr out;
        for (auto& [w, c] : x.terms()) {
            for (size_t i = 0; i < w.size(); ++i) {
                Word ww = w;
                ww[i] = ww[i].applied_T();
                out += rebuild(c, ww);
            }
            for (auto& ix : bk_.ctx.all()) {
                CoefficientExpr ck = bk_.diff(c, ix);
                if (ck.is_zero()) continue;
                Word ww;
                ww.push_back(gTB(ix));
                ww.insert(ww.end(), w.begin(), w.end());
                out += rebuild(ck, ww);
            }
        }
        return out;
    }

    FieldExpr S(const FieldExpr& x) {
        FieldExpr out;
        for (auto& [w, c] : x.terms()) {
            int prefix = 0;
            for (size_t i = 0; i < w.size(); ++i) {
                Word ww = w;
                ww[i] = ww[i].applied_S();
                FieldExpr part = rebuild(c, ww);
                if (prefix) part = part.scaled(Scalar(-1));
                out += part;
                prefix ^= w[i].parity();
            }
            for (auto& ix : bk_.ctx.all()) {
                CoefficientExpr ck = bk_.diff(c, ix);
                if (ck.is_zero()) continue;
                Word ww;
                ww.push_back(gSB(ix));
                ww.insert(ww.end(), w.begin(), w.end());
                out += rebuild(ck, ww);
            }
        }
        return out;
    }

    // left-nested product of a coefficient and an arbitrary letter sequence
    FieldExpr rebuild(const CoefficientExpr& c, const Word& letters) {
        FieldExpr x(bk_.normalize(c));
        for (auto& g : letters) x = mul_gen(x, g);
        return x;
    }

    // ---- normally ordered product --------------------------------------

    FieldExpr nop(const FieldExpr& x, const FieldExpr& y) {
        FieldExpr out;
        for (auto& [wx, cx] : x.terms())
            for (auto& [wy, cy] : y.terms()) out += nop_term(cx, wx, cy, wy);
        return out;
    }

    // right multiplication by a single letter, term by term
    FieldExpr mul_gen(const FieldExpr& x, const Gen& g) {
        FieldExpr out;
        for (auto& [w, c] : x.terms()) out += mul_term_gen(c, w, g);
        return out;
    }

    // ---- the Lambda bracket --------------------------------------------

    FieldPoly bracket(const FieldExpr& a, const FieldExpr& b) {
        FieldPoly out;
        for (auto& [wa, ca] : a.terms())
            for (auto& [wb, cb] : b.terms()) out += br_term(ca, wa, cb, wb);
        return out;
    }

    // the three-term associativity defect; zero for a vertex algebra
    FieldBiPoly jacobi_defect(const FieldExpr& a, const FieldExpr& b,
                              const FieldExpr& c) {
        int pa = 0, pb = 0;
        a.homogeneous(&pa);
        b.homogeneous(&pb);
        FieldBiPoly out;

        FieldPoly bc = bracket(b, c);
        for (auto& [k, d] : bc.t) {
            FieldPoly q = bracket(a, d);
            Scalar s1((k.second == 1 && (pa + 1) % 2 == 1) ? -1 : 1);
            bi_insert_gamma_left(out, k.first, k.second, q, s1);
        }

        FieldPoly ab = bracket(a, b);
        for (auto& [k, x] : ab.t) {
            FieldPoly q = bracket(x, c);
            Scalar s2(k.second == 1 ? -1 : 1);
            s2 = s2 * Scalar(pa % 2 == 1 ? -1 : 1);
            bi_insert_shifted(out, k.first, k.second, q, s2);
        }

        FieldPoly ac = bracket(a, c);
        FieldBiPoly t3;
        for (auto& [k, v] : ac.t) {
            FieldPoly q = bracket(b, v);
            Scalar s3((k.second == 1 && (pb + 1) % 2 == 1) ? -1 : 1);
            bi_insert_lambda_left(t3, k.first, k.second, q, s3);
        }
        Scalar s4(((pa + 1) * (pb + 1)) % 2 == 1 ? -1 : 1);
        out += t3.scaled(-s4);
        return out;
    }

    // quasi-commutator: ab - (-1)^{ab} ba as an integral of the bracket
    FieldExpr comm_defect(const FieldExpr& a, const FieldExpr& b) {
        int pa = 0, pb = 0;
        a.homogeneous(&pa);
        b.homogeneous(&pb);
        FieldExpr lhs = nop(a, b);
        FieldExpr rhs = nop(b, a);
        if (pa && pb) lhs += rhs;
        else lhs -= rhs;
        FieldExpr integral = integrate_nabla(bracket(a, b));
        return lhs - integral;
    }

    FieldExpr integrate_nabla(const FieldPoly& p) {
        return lp_integrate_nabla(p, [this](const FieldExpr& v) { return T(v); });
    }

    // Value equality.  Coefficients of the difference are renormalized so
    // that sum-level rules see groups reassembled from both sides.
    bool eq(const FieldExpr& a, const FieldExpr& b) {
        FieldExpr d = a - b;
        for (auto& [w, c] : d.terms())
            if (!bk_.normalize(c).is_zero()) return false;
        return true;
    }

    size_t memo_size() const { return memo_.size(); }

  private:
    Backend bk_;
    std::map<std::string, FieldPoly> memo_;
    long depth_ = 0;

    struct Guard {
        Algebra* a;
        explicit Guard(Algebra* al) : a(al) {
            if (++a->depth_ > 20000)
                throw budget_error("bracket recursion depth exceeded");
        }
        ~Guard() { --a->depth_; }
    };

    static std::string word_key(const Word& w) {
        std::string s;
        for (auto& g : w) s += to_string(g);
        return s;
    }

    // ---- product internals ---------------------------------------------

    FieldExpr nop_term(const CoefficientExpr& cx, const Word& wx,
                       const CoefficientExpr& cy, const Word& wy) {
        Guard g(this);
        if (cx.is_zero() || cy.is_zero()) return {};
        if (wx.empty() && wy.empty()) {
            // functions of B multiply commutatively
            return FieldExpr(bk_.mul(cx, cy));
        }
        if (wy.empty()) {
            if (cy.is_scalar())
                return FieldExpr::term(cy.scalar_value() * cx, wx);
            // right function: commute it to the front, then the ordering integral
            FieldExpr out = nop_term(cy, Word{}, cx, wx);
            out += integrate_nabla(br_term(cx, wx, cy, Word{}));
            return out;
        }
        if (wx.empty() && cx.is_scalar()) {
            return FieldExpr::term(cx.scalar_value() * cy, wy);
        }
        Word wyp(wy.begin(), wy.end() - 1);
        Gen yk = wy.back();
        FieldExpr A = nop_term(cx, wx, cy, wyp);
        FieldExpr out = mul_gen(A, yk);
        out -= qa_corr(FieldExpr::term(cx, wx), FieldExpr::term(cy, wyp), yk);
        return out;
    }

    // sum over the negative modes pairing in the associativity correction
    FieldExpr qa_corr(const FieldExpr& A, const FieldExpr& B, const Gen& cg) {
        int pA = 0, pB = 0;
        A.homogeneous(&pA);
        B.homogeneous(&pB);
        FieldExpr cexp = FieldExpr::gen(cg);
        FieldExpr out;
        FieldPoly brBc = bracket(B, cexp);
        for (auto& [k, v] : brBc.t) {
            if (k.second != 1) continue;
            out += nop(T_power_scaled(A, k.first + 1), v.scaled(Scalar(factorial(k.first))));
        }
        FieldPoly brAc = bracket(A, cexp);
        for (auto& [k, v] : brAc.t) {
            if (k.second != 1) continue;
            FieldExpr part =
                nop(T_power_scaled(B, k.first + 1), v.scaled(Scalar(factorial(k.first))));
            if (pA && pB) part = part.scaled(Scalar(-1));
            out += part;
        }
        return out;
    }

    // T^m(x) / m!
    FieldExpr T_power_scaled(const FieldExpr& x, int m) {
        FieldExpr r = x;
        for (int i = 0; i < m; ++i) r = T(r);
        return r.scaled(Scalar(Rational(1) / factorial(m)));
    }

    FieldExpr mul_term_gen(const CoefficientExpr& c, const Word& w, const Gen& g) {
        Guard gu(this);
        if (w.empty()) return FieldExpr::term(c, Word{g});
        Gen um = w.back();
        if (um < g || (um == g && g.parity() == 0)) {
            Word ww = w;
            ww.push_back(g);
            return FieldExpr::term(c, ww);
        }
        Word up(w.begin(), w.end() - 1);
        FieldExpr Aexp = FieldExpr::term(c, up);
        if (um == g) {
            // odd square: the two-letter product vanishes but the
            // associativity correction of the nesting survives
            return qa_corr(Aexp, FieldExpr::gen(um), g);
        }
        int s = (um.parity() && g.parity()) ? -1 : 1;
        FieldExpr main = mul_gen(mul_term_gen(c, up, g), um).scaled(Scalar(s));
        FieldExpr corrB = qa_corr(Aexp, FieldExpr::gen(g), um).scaled(Scalar(-s));
        FieldExpr inter = integrate_nabla(
            br_term(CoefficientExpr(Scalar(1)), Word{um}, CoefficientExpr(Scalar(1)), Word{g}));
        FieldExpr mid = nop(Aexp, inter);
        FieldExpr corrA = qa_corr(Aexp, FieldExpr::gen(um), g);
        return main + corrB + mid + corrA;
    }

    // ---- bracket internals ---------------------------------------------

    FieldPoly br_term(const CoefficientExpr& cx, const Word& wx,
                      const CoefficientExpr& cy, const Word& wy) {
        Guard g(this);
        if (cx.is_zero() || cy.is_zero()) return {};
        std::string key = to_string(cx) + "\x01" + word_key(wx) + "\x01" +
                          to_string(cy) + "\x01" + word_key(wy);
        auto mit = memo_.find(key);
        if (mit != memo_.end()) return mit->second;
        FieldPoly out = br_term_impl(cx, wx, cy, wy);
        memo_.emplace(std::move(key), out);
        return out;
    }

    FieldPoly br_term_impl(const CoefficientExpr& cx, const Word& wx,
                           const CoefficientExpr& cy, const Word& wy) {
        bool right_complex =
            wy.size() >= 2 || (wy.size() == 1 && !cy.is_scalar());
        if (right_complex) return br_wick(cx, wx, cy, wy);

        if (wy.size() == 1 && (wy[0].k > 0 || wy[0].s > 0)) {
            // cy is scalar here; strip the outermost derivation on the right
            Gen inner = wy[0];
            int pa = word_parity(wx);
            if (inner.k > 0) {
                inner.k -= 1;
                FieldPoly p = br_term(cx, wx, cy, Word{inner});
                FieldPoly out = lp_apply_T(p, [this](const FieldExpr& v) { return T(v); });
                out += lp_mul_lambda(p);
                return out;
            }
            inner.s = 0;
            FieldPoly p = br_term(cx, wx, cy, Word{inner});
            FieldPoly out = lp_apply_S(p, [this](const FieldExpr& v) { return S(v); });
            out += lp_mul_chi_dual(p);
            return out.scaled(Scalar(pa % 2 == 0 ? -1 : 1));
        }

        // right side is now a plain letter, a pure function, or a scalar
        if (wy.empty() && cy.is_scalar()) return {};
        if (wx.empty() && cx.is_scalar()) return {};

        bool left_single_plain = (wx.size() == 1 && cx.is_scalar());
        if (left_single_plain && (wx[0].k > 0 || wx[0].s > 0)) {
            Gen inner = wx[0];
            if (inner.k > 0) {
                inner.k -= 1;
                FieldPoly p = br_term(cx, Word{inner}, cy, wy);
                return lp_mul_lambda(p).scaled(Scalar(-1));
            }
            inner.s = 0;
            FieldPoly p = br_term(cx, Word{inner}, cy, wy);
            return lp_mul_chi(p);
        }

        bool left_base = left_single_plain || (wx.empty() && !cx.is_scalar());
        if (!left_base) {
            // left still composite: flip the arguments once
            int pa = word_parity(wx), pb = word_parity(wy);
            FieldPoly q = br_term(cy, wy, cx, wx);
            return lp_skew_substitute(
                q, (pa && pb) ? -1 : 1,
                [this](const FieldExpr& v) { return T(v); },
                [this](const FieldExpr& v) { return S(v); });
        }

        return br_base(cx, wx, cy, wy);
    }

    FieldPoly br_wick(const CoefficientExpr& cx, const Word& wx,
                      const CoefficientExpr& cy, const Word& wy) {
        Word wyp(wy.begin(), wy.end() - 1);
        Gen yk = wy.back();
        int pa = word_parity(wx);
        int pb = word_parity(wyp);
        FieldPoly P = br_term(cx, wx, cy, wyp);
        FieldPoly R = br_term(cx, wx, CoefficientExpr(Scalar(1)), Word{yk});
        FieldPoly out;
        for (auto& [k, v] : P.t) out.add(k.first, k.second, mul_gen(v, yk));
        FieldExpr bexp = FieldExpr::term(cy, wyp);
        for (auto& [k, v] : R.t) {
            FieldExpr t = nop(bexp, v);
            // Koszul factor for b moving past the bracket operation and
            // past the chi of each monomial
            if ((((pa + 1) + k.second) * pb) % 2 == 1) t = t.scaled(Scalar(-1));
            out.add(k.first, k.second, t);
        }
        FieldExpr ykexp = FieldExpr::gen(yk);
        for (auto& [k, v] : P.t) {
            FieldPoly q = bracket(v, ykexp);
            for (auto& [m, w] : q.t) {
                if (m.second != 1) continue;
                out.add(k.first + m.first + 1, k.second,
                        w.scaled(Scalar(Rational(1, m.first + 1))));
            }
        }
        return out;
    }

    FieldPoly br_base(const CoefficientExpr& cx, const Word& wx,
                      const CoefficientExpr& cy, const Word& wy) {
        FieldPoly out;
        if (wx.size() == 1 && wy.size() == 1) {
            const Gen &x = wx[0], &y = wy[0];
            if (x.fam != y.fam && x.idx == y.idx) {
                Scalar v = cx.scalar_value() * cy.scalar_value();
                out.add(0, 0, FieldExpr(CoefficientExpr(v)));
            }
            return out;
        }
        if (wx.size() == 1 && wy.empty()) {
            const Gen& x = wx[0];
            if (x.fam == Fam::Psi) {
                CoefficientExpr d = bk_.diff(cy, x.idx);
                out.add(0, 0, FieldExpr(d).scaled(cx.scalar_value()));
            }
            return out;
        }
        if (wx.empty() && wy.size() == 1) {
            const Gen& y = wy[0];
            if (y.fam == Fam::Psi) {
                CoefficientExpr d = bk_.diff(cx, y.idx);
                out.add(0, 0, FieldExpr(d).scaled(cy.scalar_value()));
            }
            return out;
        }
        // two functions
        return out;
    }
};

}  // namespace sva
