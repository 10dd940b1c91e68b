#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "algebra.hpp"
#include "component.hpp"

namespace sva {

struct structure_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline CoefficientExpr geo_sym(SymKind k, std::vector<Idx> ix,
                               std::vector<Idx> dv = {}) {
    return CoefficientExpr::symbol(make_sym(k, std::move(ix), std::move(dv)));
}

inline bool weight_homogeneous(const FieldExpr& e, const Rational& w) {
    for (auto& [word, c] : e.terms())
        if (word_weight(word) != w) return false;
    return true;
}

// ---- stress sections ----------------------------------------------------

// free part: sum_i ( SB^i SPsi_i + TB^i Psi_i ), odd, weight 3/2
inline FieldExpr mk_H0(Algebra& alg) {
    FieldExpr h;
    for (auto& i : alg.ctx().all()) {
        h += alg.rebuild(CoefficientExpr(Scalar(1)), {gSB(i), gSPsi(i)});
        h += alg.rebuild(CoefficientExpr(Scalar(1)), {gTB(i), gPsi(i)});
    }
    return h;
}

// the free part corrected by the potential: H0 - T S gbold
inline FieldExpr mk_H(Algebra& alg) {
    FieldExpr h = mk_H0(alg);
    h -= alg.T(alg.S(FieldExpr(geo_sym(SymKind::GBold, {}))));
    return h;
}

// ---- currents -----------------------------------------------------------

// scaled two-form current:
//   1/2 sum_{ij} ( mu w_{ij} SB^i SB^j + mu^{-1} w^{ij} Psi_i Psi_j )
inline FieldExpr mk_Jomega(Algebra& alg, const Scalar& mu) {
    Scalar half(Rational(1, 2));
    Scalar mui = Scalar(1) / mu;
    FieldExpr out;
    for (auto& i : alg.ctx().all())
        for (auto& j : alg.ctx().all()) {
            out += alg.rebuild(geo_sym(SymKind::WLo, {i, j}) * (half * mu),
                               {gSB(i), gSB(j)});
            out += alg.rebuild(geo_sym(SymKind::WUp, {i, j}) * (half * mui),
                               {gPsi(i), gPsi(j)});
        }
    return out;
}

inline FieldExpr mk_J_symplectic(Algebra& alg) { return mk_Jomega(alg, Scalar(1)); }

// current of an endomorphism given by a dense matrix over ctx.all():
//   K_i^j SB^i Psi_j + Gamma^i_{jk} K_i^j TB^k
using GeoMatrix = std::vector<std::vector<CoefficientExpr>>;

inline FieldExpr mk_J_from_matrix(Algebra& alg, const GeoMatrix& K) {
    auto all = alg.ctx().all();
    FieldExpr out;
    for (size_t i = 0; i < all.size(); ++i)
        for (size_t j = 0; j < all.size(); ++j) {
            CoefficientExpr c = alg.backend().normalize(K[i][j]);
            if (c.is_zero()) continue;
            out += alg.rebuild(c, {gSB(all[i]), gPsi(all[j])});
            for (auto& k : all)
                out += alg.rebuild(
                    geo_sym(SymKind::Gamma, {all[i], all[j], k}) * c, {gTB(k)});
        }
    return out;
}

inline GeoMatrix mat_cplx(const Backend& bk) {
    auto all = bk.ctx.all();
    GeoMatrix m(all.size(), std::vector<CoefficientExpr>(all.size()));
    for (size_t i = 0; i < all.size(); ++i)
        for (size_t j = 0; j < all.size(); ++j)
            m[i][j] = bk.normalize(geo_sym(SymKind::Cplx, {all[i], all[j]}));
    return m;
}

// current of the integrable structure fixed by the backend coordinates
inline FieldExpr mk_J_from_K(Algebra& alg) {
    return mk_J_from_matrix(alg, mat_cplx(alg.backend()));
}

// ---- the second stress section ------------------------------------------

// three-term presentation:
//   Gamma^k_{jl} g^{ij} SB^l (Psi_i Psi_k) + g^{ij} SPsi_i Psi_j
//   + g_{ij} TB^i SB^j
inline FieldExpr mk_Hprime(Algebra& alg) {
    auto all = alg.ctx().all();
    FieldExpr out;
    for (auto& i : all)
        for (auto& j : all) {
            CoefficientExpr gup = alg.backend().normalize(geo_sym(SymKind::GUp, {i, j}));
            CoefficientExpr glo = alg.backend().normalize(geo_sym(SymKind::GLo, {i, j}));
            if (!glo.is_zero()) out += alg.rebuild(glo, {gTB(i), gSB(j)});
            if (gup.is_zero()) continue;
            out += alg.rebuild(gup, {gSPsi(i), gPsi(j)});
            for (auto& k : all)
                for (auto& l : all) {
                    CoefficientExpr c = alg.backend().normalize(
                        geo_sym(SymKind::Gamma, {k, j, l}) * gup);
                    if (c.is_zero()) continue;
                    FieldExpr inner =
                        alg.nop(FieldExpr::gen(gPsi(i)), FieldExpr::gen(gPsi(k)));
                    out += alg.nop(FieldExpr::gen(gSB(l), c), inner);
                }
        }
    return out;
}

// the same section through the bracket of the two currents; callers check
// separately that the bracket is constant in the parameters
inline FieldExpr mk_Hprime_via_bracket(Algebra& alg) {
    FieldPoly p = alg.bracket(mk_J_from_K(alg), mk_Jomega(alg, Scalar(1)));
    FieldExpr out;
    auto it = p.t.find({0, 0});
    if (it != p.t.end()) out -= it->second;
    return out;
}

// ---- commuting halves ---------------------------------------------------

struct Sector {
    FieldExpr H;  // stress section, weight 3/2
    FieldExpr J;  // current, weight 1
};

inline std::pair<Sector, Sector> mk_pm_sectors(Algebra& alg) {
    FieldExpr H = mk_H(alg);
    FieldExpr Hp = mk_Hprime(alg);
    FieldExpr J1 = mk_J_from_K(alg);
    FieldExpr J2 = mk_Jomega(alg, Scalar(1));
    Scalar half(Rational(1, 2));
    return {Sector{(H + Hp).scaled(half), (J1 + J2).scaled(half)},
            Sector{(H - Hp).scaled(half), (J1 - J2).scaled(half)}};
}

// ---- the quaternionic family --------------------------------------------

// apply A first, then B: entries sum_j A_i^j B_j^k
inline GeoMatrix mat_compose(const Backend& bk, const GeoMatrix& A,
                             const GeoMatrix& B) {
    size_t m = A.size();
    GeoMatrix r(m, std::vector<CoefficientExpr>(m));
    for (size_t i = 0; i < m; ++i)
        for (size_t k = 0; k < m; ++k) {
            CoefficientExpr acc;
            for (size_t j = 0; j < m; ++j) acc += A[i][j] * B[j][k];
            r[i][k] = bk.normalize(acc);
        }
    return r;
}

inline bool mat_eq(const Backend& bk, const GeoMatrix& A, const GeoMatrix& B,
                   const Scalar& scale_b) {
    for (size_t i = 0; i < A.size(); ++i)
        for (size_t j = 0; j < A.size(); ++j) {
            CoefficientExpr d = A[i][j] + B[i][j] * (-scale_b);
            if (!bk.normalize(d).is_zero()) return false;
        }
    return true;
}

inline GeoMatrix mat_minus_identity(const Backend& bk) {
    auto all = bk.ctx.all();
    GeoMatrix m(all.size(), std::vector<CoefficientExpr>(all.size()));
    for (size_t i = 0; i < all.size(); ++i) m[i][i] = CoefficientExpr(Scalar(-1));
    return m;
}

// transverse structures from the holomorphic pairing, raised by the metric:
//   (K)_a^c = hs * sum_b eta_{ab} g^{bc}   on the holomorphic rows,
//   conjugate block scaled by as.
inline GeoMatrix mat_eta_over_g(const Backend& bk, const Scalar& hs,
                                const Scalar& as) {
    auto all = bk.ctx.all();
    const int n = bk.ctx.dim;
    GeoMatrix m(all.size(), std::vector<CoefficientExpr>(all.size()));
    for (size_t i = 0; i < all.size(); ++i)
        for (size_t j = 0; j < all.size(); ++j) {
            Idx a = all[i], c = all[j];
            if (a.cls == c.cls) continue;
            CoefficientExpr acc;
            for (int k = 1; k <= n; ++k) {
                Idx b{a.cls, k};
                if (a.cls == IndexClass::Hol)
                    acc += geo_sym(SymKind::EtaLo, {a, b}) *
                           geo_sym(SymKind::GUp, {b, c});
                else
                    acc += geo_sym(SymKind::EtaLo, {a, b}) *
                           geo_sym(SymKind::GUp, {c, b});
            }
            m[i][j] = bk.normalize(
                acc * (a.cls == IndexClass::Hol ? hs : as));
        }
    return m;
}

struct HyperFamily {
    FieldExpr H, Hprime, Hplus, Hminus;
    std::array<FieldExpr, 3> J;   // structure currents
    std::array<FieldExpr, 3> Jw;  // two-form currents
    std::array<FieldExpr, 3> Jp;  // 1/2 (J_i + Jw_i)
    std::array<FieldExpr, 3> Jm;  // 1/2 (J_i - Jw_i)
    FieldExpr Jplus, Jminus;      // pairing combinations of Jw2, Jw3
    FieldExpr Omega, beta;        // holomorphic building blocks
};

inline HyperFamily mk_hyper_family(Algebra& alg) {
    const Backend& bk = alg.backend();
    const auto& ctx = bk.ctx;
    if (!ctx.complex_pairs || ctx.dim % 2 != 0)
        throw structure_error("hyper family needs a paired context of even dimension");

    GeoMatrix I1 = mat_cplx(bk);
    GeoMatrix I2 = mat_eta_over_g(bk, Scalar(1), Scalar(1));
    GeoMatrix I3 = mat_eta_over_g(bk, Scalar::i(), -Scalar::i());
    GeoMatrix mi = mat_minus_identity(bk);
    bool quaternionic = mat_eq(bk, mat_compose(bk, I1, I2), I3, Scalar(1)) &&
                        mat_eq(bk, mat_compose(bk, I2, I1), I3, Scalar(-1)) &&
                        mat_eq(bk, mat_compose(bk, I1, I1), mi, Scalar(1)) &&
                        mat_eq(bk, mat_compose(bk, I2, I2), mi, Scalar(1)) &&
                        mat_eq(bk, mat_compose(bk, I3, I3), mi, Scalar(1));
    if (!quaternionic)
        throw structure_error("structure matrices do not close quaternionically");

    HyperFamily F;
    F.H = mk_H(alg);
    F.J[0] = mk_J_from_matrix(alg, I1);
    F.J[1] = mk_J_from_matrix(alg, I2);
    F.J[2] = mk_J_from_matrix(alg, I3);
    F.Jw[0] = mk_Jomega(alg, Scalar(1));

    const int n = ctx.dim;
    FieldExpr Om, OmC, be, beC;
    for (int a = 1; a <= n; ++a)
        for (int b = 1; b <= n; ++b) {
            Idx ha{IndexClass::Hol, a}, hb{IndexClass::Hol, b};
            Idx aa{IndexClass::AntiHol, a}, ab{IndexClass::AntiHol, b};
            Om += alg.rebuild(geo_sym(SymKind::EtaLo, {ha, hb}), {gSB(ha), gSB(hb)});
            OmC += alg.rebuild(geo_sym(SymKind::EtaLo, {aa, ab}), {gSB(aa), gSB(ab)});
            be += alg.rebuild(geo_sym(SymKind::EtaUp, {ha, hb}), {gPsi(ha), gPsi(hb)});
            beC += alg.rebuild(geo_sym(SymKind::EtaUp, {aa, ab}), {gPsi(aa), gPsi(ab)});
        }
    F.Omega = Om;
    F.beta = be;
    Scalar half(Rational(1, 2));
    F.Jplus = (Om + beC).scaled(half);
    F.Jminus = (OmC + be).scaled(half);
    F.Jw[1] = F.Jplus + F.Jminus;
    F.Jw[2] = (F.Jplus - F.Jminus).scaled(Scalar::i());

    FieldPoly p = alg.bracket(F.J[0], F.Jw[0]);
    auto it = p.t.find({0, 0});
    if (it != p.t.end()) F.Hprime -= it->second;
    F.Hplus = (F.H + F.Hprime).scaled(half);
    F.Hminus = (F.H - F.Hprime).scaled(half);
    for (int i = 0; i < 3; ++i) {
        F.Jp[i] = (F.J[i] + F.Jw[i]).scaled(half);
        F.Jm[i] = (F.J[i] - F.Jw[i]).scaled(half);
    }
    return F;
}

// ---- classical operators ------------------------------------------------

// odd zero mode of the second stress section on classical fields
class SPrime {
  public:
    SPrime(CompAlgebra& ca, CompExpr gprime) : ca_(&ca), gp_(std::move(gprime)) {}

    const CompExpr& generator() const { return gp_; }

    CompExpr operator()(const CompExpr& x) const {
        CompPoly p = ca_->bracket(gp_, x);
        auto it = p.t.find(0);
        return it == p.t.end() ? CompExpr() : it->second;
    }

  private:
    CompAlgebra* ca_;
    CompExpr gp_;
};

inline SPrime op_Sprime(Algebra& alg, CompAlgebra& ca) {
    return SPrime(ca, comp_bottom(ca, mk_Hprime(alg)));
}

// multiplicative substitution on classical fields:
//   b^i -> b^i, psi_i -> g_{ij} phi^j, phi^i -> g^{ij} psi_j,
//   a_i -> S' (g_{ij} phi^j)
class Automorphism {
  public:
    Automorphism(CompAlgebra& ca, SPrime sp) : ca_(&ca), sp_(std::move(sp)) {}

    CompExpr image(const CGen& g) const {
        CompExpr base;
        switch (g.fam) {
            case CFam::B:
                base = CompExpr::gen(cb(g.idx));
                break;
            case CFam::Psi:
                base = lowered(CFam::Phi, g.idx);
                break;
            case CFam::Phi:
                for (auto& j : ca_->ctx().all())
                    base += CompExpr::gen(cpsi(j), ca_->backend().normalize(
                                                       geo_sym(SymKind::GUp, {g.idx, j})));
                break;
            case CFam::A:
                base = sp_(lowered(CFam::Phi, g.idx));
                break;
        }
        for (int m = 0; m < g.k; ++m) base = ca_->T(base);
        return base;
    }

    CompExpr operator()(const CompExpr& x) const {
        CompExpr out;
        for (auto& [w, c] : x.terms()) {
            CompExpr t(ca_->backend().normalize(c));
            for (auto& g : w) t = ca_->nop(t, image(g));
            out += t;
        }
        return out;
    }

  private:
    CompExpr lowered(CFam fam, Idx i) const {
        CompExpr out;
        for (auto& j : ca_->ctx().all())
            out += CompExpr::gen(CGen{fam, j, 0}, ca_->backend().normalize(
                                                      geo_sym(SymKind::GLo, {i, j})));
        return out;
    }

    CompAlgebra* ca_;
    SPrime sp_;
};

inline Automorphism mk_automorphism(Algebra& alg, CompAlgebra& ca) {
    return Automorphism(ca, op_Sprime(alg, ca));
}

// ---- named sections -----------------------------------------------------

inline Scalar parse_scalar(const std::string& s) {
    if (s == "i") return Scalar::i();
    if (s == "-i") return -Scalar::i();
    size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw structure_error("bad scalar literal: " + s);
    return Scalar(v);
}

inline FieldExpr mk_section(Algebra& alg, const std::string& id) {
    if (id == "H") return mk_H(alg);
    if (id == "H0") return mk_H0(alg);
    if (id == "Hprime") return mk_Hprime(alg);
    if (id == "J1") return mk_J_from_K(alg);
    if (id == "J2") return mk_Jomega(alg, Scalar(1));
    if (id == "Jsymp") return mk_J_symplectic(alg);
    if (id == "Jplus") return mk_pm_sectors(alg).first.J;
    if (id == "Jminus") return mk_pm_sectors(alg).second.J;
    if (id == "Hplus") return mk_pm_sectors(alg).first.H;
    if (id == "Hminus") return mk_pm_sectors(alg).second.H;
    const std::string jw = "Jomega:mu=";
    if (id.rfind(jw, 0) == 0) return mk_Jomega(alg, parse_scalar(id.substr(jw.size())));
    const std::string hk = "hk:";
    if (id.rfind(hk, 0) == 0) {
        HyperFamily F = mk_hyper_family(alg);
        std::string r = id.substr(hk.size());
        if (r == "J1") return F.J[0];
        if (r == "J2") return F.J[1];
        if (r == "J3") return F.J[2];
        if (r == "Jw1") return F.Jw[0];
        if (r == "Jw2") return F.Jw[1];
        if (r == "Jw3") return F.Jw[2];
        if (r == "Jplus") return F.Jplus;
        if (r == "Jminus") return F.Jminus;
        if (r == "Hprime") return F.Hprime;
        if (r == "Hplus") return F.Hplus;
        if (r == "Hminus") return F.Hminus;
    }
    throw structure_error("unknown section id: " + id);
}

}  // namespace sva
