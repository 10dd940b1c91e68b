#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "coeff.hpp"
#include "errors.hpp"

namespace sva {

enum class BackendKind {
    Flat,          // real indices, g = delta, Gamma = 0
    FlatComplex,   // paired indices, g = delta, w = i*delta, eta = standard
    Darboux,       // real indices, w = standard symplectic matrix
    Kahler,        // paired indices, symbolic g/Gamma with parallelism rules
    CalabiYau,     // Kahler + mixed derivatives of the potential vanish
    HyperKahler,   // CalabiYau + holomorphic symplectic eta
    Abstract,      // no geometry; user constants only
};

inline std::string to_string(BackendKind k) {
    switch (k) {
        case BackendKind::Flat: return "flat";
        case BackendKind::FlatComplex: return "flat-complex";
        case BackendKind::Darboux: return "darboux";
        case BackendKind::Kahler: return "kahler";
        case BackendKind::CalabiYau: return "calabi-yau";
        case BackendKind::HyperKahler: return "hyperkahler";
        case BackendKind::Abstract: return "abstract";
    }
    return "?";
}

struct UserSymbolSpec {
    int arity = 0;
    bool constant = true;
};

/// A coefficient-ring backend: carries the index context plus the rewrite
/// rules that bring CoefficientExpr values to a canonical normal form.
///
/// Rule layers, applied to a fixpoint in this order:
///   1. per-factor rules: numeric resolution, type-compatibility vanishing,
///      two-form orientation (w -> i g), covariant-constancy elimination of
///      derivatives of g/w/eta, coordinate derivatives, potential rules;
///   2. whole-sum contractions: Gamma trace -> potential derivative,
///      g g -> delta, eta eta -> delta (complete dummy groups only);
///   3. Christoffel derivative exchange (moves the smallest derivative index
///      into the lower pair, at the cost of quadratic Gamma terms).
class Backend {
  public:
    BackendKind kind = BackendKind::Abstract;
    IndexContext ctx{false, 0};
    std::string name;

    // diagnostics: abort with an explanation instead of looping
    int max_deriv_order = 8;
    long max_steps = 2000000;

    std::map<std::string, UserSymbolSpec> user_symbols;

    Backend() = default;
    Backend(BackendKind k, IndexContext c, std::string n)
        : kind(k), ctx(c), name(std::move(n)) {}

    static Backend flat(int m) {
        return Backend(BackendKind::Flat, IndexContext{false, m},
                       "flat:" + std::to_string(m));
    }
    static Backend flat_complex(int n) {
        return Backend(BackendKind::FlatComplex, IndexContext{true, n},
                       "flat-complex:" + std::to_string(n));
    }
    static Backend darboux(int n) {
        return Backend(BackendKind::Darboux, IndexContext{false, 2 * n},
                       "darboux:" + std::to_string(n));
    }
    static Backend kahler(int n) {
        return Backend(BackendKind::Kahler, IndexContext{true, n},
                       "kahler:" + std::to_string(n));
    }
    static Backend calabi_yau(int n) {
        return Backend(BackendKind::CalabiYau, IndexContext{true, n},
                       "calabi-yau:" + std::to_string(n));
    }
    // n = quaternionic dimension; holomorphic dimension is 2n
    static Backend hyperkahler(int n) {
        return Backend(BackendKind::HyperKahler, IndexContext{true, 2 * n},
                       "hyperkahler:" + std::to_string(n));
    }
    static Backend abstract_constants(std::initializer_list<std::string> names) {
        Backend b(BackendKind::Abstract, IndexContext{false, 0}, "abstract");
        for (auto& nm : names) b.user_symbols[nm] = UserSymbolSpec{0, true};
        return b;
    }

    bool kahler_family() const {
        return kind == BackendKind::Kahler || kind == BackendKind::CalabiYau ||
               kind == BackendKind::HyperKahler;
    }
    bool cy_rules() const {
        return kind == BackendKind::CalabiYau || kind == BackendKind::HyperKahler;
    }
    bool numeric_geometry() const {
        return kind == BackendKind::Flat || kind == BackendKind::FlatComplex ||
               kind == BackendKind::Darboux;
    }

    void declare(const std::string& nm, int arity, bool constant) {
        user_symbols[nm] = UserSymbolSpec{arity, constant};
    }

    // ---- public entry points -------------------------------------------

    CoefficientExpr normalize(const CoefficientExpr& e) const {
        long steps = 0;
        return normalize_impl(e, steps);
    }

    CoefficientExpr mul(const CoefficientExpr& a, const CoefficientExpr& b) const {
        return normalize(a * b);
    }

    CoefficientExpr diff(const CoefficientExpr& e, Idx d) const {
        ctx.require(d);
        return normalize(e.diff_raw(d));
    }

    CoefficientExpr conjugate(const CoefficientExpr& e) const {
        if (!ctx.complex_pairs)
            throw context_error("conjugation requires a paired-index context");
        return normalize(e.conjugated());
    }

  private:
    // ---- helpers -------------------------------------------------------

    static bool same_class(const Idx& a, const Idx& b) { return a.cls == b.cls; }

    static Scalar delta_strict(const Idx& a, const Idx& b) {
        return (a == b) ? Scalar(1) : Scalar(0);
    }

    // ---- numeric resolution (flat / darboux / flat-complex) ------------

    // Returns the constant value of a geometric symbol on a numeric backend,
    // or nullopt when the symbol stays formal (coords, user functions).
    std::optional<Scalar> numeric_value(const FunctionSymbol& s) const {
        switch (s.kind) {
            case SymKind::Coord:
            case SymKind::User:
                return std::nullopt;
            default: break;
        }
        if (!s.derivs.empty()) return Scalar(0);  // constants
        const auto& ix = s.indices;
        switch (s.kind) {
            case SymKind::GBold:
                return Scalar(0);
            case SymKind::GLo:
            case SymKind::GUp:
                if (ctx.complex_pairs) {
                    // canonical order (hol, antihol); same-class pairs vanish
                    if (same_class(ix[0], ix[1])) return Scalar(0);
                    return Scalar(ix[0].ord == ix[1].ord ? 1 : 0);
                }
                return delta_strict(ix[0], ix[1]);
            case SymKind::WLo:
            case SymKind::WUp: {
                if (kind == BackendKind::Darboux) {
                    // standard symplectic matrix; wup stores -inverse = same matrix
                    int half = ctx.dim / 2;
                    if (ix[0].ord <= half && ix[1].ord == ix[0].ord + half)
                        return Scalar(1);
                    return Scalar(0);
                }
                if (ctx.complex_pairs) {
                    if (same_class(ix[0], ix[1])) return Scalar(0);
                    Scalar d(ix[0].ord == ix[1].ord ? 1 : 0);
                    return s.kind == SymKind::WLo ? Scalar::i() * d
                                                 : -Scalar::i() * d;
                }
                return std::nullopt;  // flat real: no preferred two-form
            }
            case SymKind::Gamma:
                return Scalar(0);
            case SymKind::EtaLo:
            case SymKind::EtaUp: {
                if (kind != BackendKind::FlatComplex) return std::nullopt;
                if (!same_class(ix[0], ix[1])) return Scalar(0);
                // standard holomorphic symplectic pairing (1,2),(3,4),...
                if (ix[1].ord == ix[0].ord + 1 && ix[0].ord % 2 == 1)
                    return Scalar(1);
                return Scalar(0);
            }
            case SymKind::Cplx: {
                if (!ctx.complex_pairs) return std::nullopt;
                if (!same_class(ix[0], ix[1])) return Scalar(0);
                Scalar d(ix[0].ord == ix[1].ord ? 1 : 0);
                return ix[0].cls == IndexClass::Hol ? Scalar::i() * d
                                                    : -Scalar::i() * d;
            }
            default: return std::nullopt;
        }
    }

    // ---- symbolic per-factor rules -------------------------------------

    // Expansion of one factor into an equivalent expression, or nullopt when
    // the factor is already in normal form.  The remaining factors of the
    // monomial are multiplied back in by the caller.
    std::optional<CoefficientExpr> local_rule(const FunctionSymbol& s) const {
        const auto& ix = s.indices;
        const auto& dv = s.derivs;
        const int n = ctx.dim;

        // derivative-order diagnostic
        if ((int)dv.size() > max_deriv_order)
            throw budget_error("derivative order " + std::to_string(dv.size()) +
                               " exceeds budget " + std::to_string(max_deriv_order) +
                               " at symbol " + to_string_sym(s));

        // coordinates behave the same on every backend
        if (s.kind == SymKind::Coord) {
            if (dv.empty()) return std::nullopt;
            if (dv.size() > 1) return CoefficientExpr(Scalar(0));
            return CoefficientExpr(delta_strict(dv[0], ix[0]));
        }

        if (s.kind == SymKind::User) {
            auto it = user_symbols.find(s.name);
            if (it != user_symbols.end() && it->second.constant && !dv.empty())
                return CoefficientExpr(Scalar(0));
            return std::nullopt;
        }

        if (numeric_geometry()) {
            if (auto v = numeric_value(s)) return CoefficientExpr(*v);
            if (!dv.empty() && (s.kind == SymKind::WLo || s.kind == SymKind::WUp ||
                                s.kind == SymKind::EtaLo || s.kind == SymKind::EtaUp))
                return CoefficientExpr(Scalar(0));  // formal constants
            return std::nullopt;
        }

        if (kind == BackendKind::Abstract) return std::nullopt;

        // --- Kahler family ---

        // type-compatibility vanishing
        switch (s.kind) {
            case SymKind::GLo:
            case SymKind::GUp:
            case SymKind::WLo:
            case SymKind::WUp:
                if (same_class(ix[0], ix[1])) return CoefficientExpr(Scalar(0));
                break;
            case SymKind::Gamma:
                if (!(same_class(ix[0], ix[1]) && same_class(ix[1], ix[2])))
                    return CoefficientExpr(Scalar(0));
                break;
            case SymKind::EtaLo:
            case SymKind::EtaUp:
                if (kind != BackendKind::HyperKahler)
                    break;  // leave formal elsewhere
                if (!same_class(ix[0], ix[1])) return CoefficientExpr(Scalar(0));
                break;
            case SymKind::Cplx:
                return CoefficientExpr(*numeric_value(s));
            default: break;
        }

        // orientation: the Kahler form is i * metric
        if (s.kind == SymKind::WLo || s.kind == SymKind::WUp) {
            FunctionSymbol g = s;
            g.kind = (s.kind == SymKind::WLo) ? SymKind::GLo : SymKind::GUp;
            Scalar c = (s.kind == SymKind::WLo) ? Scalar::i() : -Scalar::i();
            return CoefficientExpr::symbol(g, c);
        }

        // mixed second derivatives of the potential vanish on Calabi-Yau
        if (s.kind == SymKind::GBold && cy_rules() && !dv.empty()) {
            bool hol = false, anti = false;
            for (auto& d : dv) {
                if (d.cls == IndexClass::Hol) hol = true;
                if (d.cls == IndexClass::AntiHol) anti = true;
            }
            if (hol && anti) return CoefficientExpr(Scalar(0));
        }

        // jets of the potential are Christoffel traces, which keeps every
        // derivative of it in one coordinate system:
        //   g_{,c D} = sum_a Gamma^a_{a c, D}
        if (s.kind == SymKind::GBold && !dv.empty()) {
            Idx cd = dv[0];
            std::vector<Idx> restD(dv.begin() + 1, dv.end());
            CoefficientExpr acc;
            for (int k = 1; k <= n; ++k) {
                Idx a{cd.cls, k};
                acc += CoefficientExpr::symbol(
                    make_sym(SymKind::Gamma, {a, a, cd}, restD));
            }
            return acc;
        }

        // covariant constancy: eliminate one derivative of g / eta
        if (!dv.empty() &&
            (s.kind == SymKind::GLo || s.kind == SymKind::GUp ||
             ((s.kind == SymKind::EtaLo || s.kind == SymKind::EtaUp) &&
              kind == BackendKind::HyperKahler))) {
            Idx d = dv[0];
            std::vector<Idx> rest(dv.begin() + 1, dv.end());
            CoefficientExpr e = first_deriv_expansion(s.kind, ix, d, n);
            for (auto& r : rest) e = e.diff_raw(r);
            return e;
        }

        return std::nullopt;
    }

    // d/dx_d of the undifferentiated symbol kind[ix] on the Kahler family
    CoefficientExpr first_deriv_expansion(SymKind k, const std::vector<Idx>& ix,
                                          Idx d, int n) const {
        CoefficientExpr acc;
        auto gamma = [&](Idx up, Idx l1, Idx l2) {
            return CoefficientExpr::symbol(make_sym(SymKind::Gamma, {up, l1, l2}));
        };
        auto sym1 = [&](SymKind kk, Idx a, Idx b) {
            return CoefficientExpr::symbol(make_sym(kk, {a, b}));
        };
        if (k == SymKind::GLo) {
            // canonical ix = (hol a, antihol b)
            if (d.cls == IndexClass::Hol) {
                for (int e = 1; e <= n; ++e) {
                    Idx eps{IndexClass::Hol, e};
                    acc += gamma(eps, d, ix[0]) * sym1(k, eps, ix[1]);
                }
            } else {
                for (int e = 1; e <= n; ++e) {
                    Idx eps{IndexClass::AntiHol, e};
                    acc += gamma(eps, d, ix[1]) * sym1(k, ix[0], eps);
                }
            }
            return acc;
        }
        if (k == SymKind::GUp) {
            if (d.cls == IndexClass::Hol) {
                for (int e = 1; e <= n; ++e) {
                    Idx eps{IndexClass::Hol, e};
                    acc += CoefficientExpr(Scalar(-1)) * gamma(ix[0], d, eps) *
                           sym1(k, eps, ix[1]);
                }
            } else {
                for (int e = 1; e <= n; ++e) {
                    Idx eps{IndexClass::AntiHol, e};
                    acc += CoefficientExpr(Scalar(-1)) * gamma(ix[1], d, eps) *
                           sym1(k, ix[0], eps);
                }
            }
            return acc;
        }
        // eta: holomorphic in its own type; parallel within it
        IndexClass pc = ix[0].cls;
        if (k == SymKind::EtaLo) {
            if (d.cls != pc) return CoefficientExpr();  // zero
            for (int e = 1; e <= n; ++e) {
                Idx eps{pc, e};
                acc += gamma(eps, d, ix[0]) * sym1(k, eps, ix[1]);
                acc += gamma(eps, d, ix[1]) * sym1(k, ix[0], eps);
            }
            return acc;
        }
        // EtaUp
        if (d.cls != pc) return CoefficientExpr();
        for (int e = 1; e <= n; ++e) {
            Idx eps{pc, e};
            acc += CoefficientExpr(Scalar(-1)) * gamma(ix[0], d, eps) * sym1(k, eps, ix[1]);
            acc += CoefficientExpr(Scalar(-1)) * gamma(ix[1], d, eps) * sym1(k, ix[0], eps);
        }
        return acc;
    }

    // ---- sum-level rules -----------------------------------------------

    struct SumHit {
        CoefficientExpr removed;   // the complete group, as written in e
        CoefficientExpr replaced;  // its contraction
    };

    // Try to find one complete contraction group inside e.
    std::optional<SumHit> sum_rule(const CoefficientExpr& e) const {
        if (!kahler_family()) return std::nullopt;
        for (auto& [mono, c] : e.terms()) {
            if (auto h = try_mixed_trace_zero(e, mono, c)) return h;
            if (auto h = try_gg_contraction(e, mono, c)) return h;
            if (kind == BackendKind::HyperKahler) {
                if (auto h = try_ee_contraction(e, mono, c)) return h;
                if (auto h = try_ege_contraction(e, mono, c, true)) return h;
                if (auto h = try_ege_contraction(e, mono, c, false)) return h;
                if (auto h = try_geg_contraction(e, mono, c, true)) return h;
                if (auto h = try_geg_contraction(e, mono, c, false)) return h;
                if (auto h = try_eg_flip(e, mono, c)) return h;
            }
        }
        return std::nullopt;
    }

    static CoeffMonomial erase_one(const CoeffMonomial& m, size_t pos) {
        CoeffMonomial r = m;
        r.erase(r.begin() + pos);
        return r;
    }

    static CoeffMonomial erase_two(const CoeffMonomial& m, size_t p1, size_t p2) {
        CoeffMonomial r;
        for (size_t i = 0; i < m.size(); ++i)
            if (i != p1 && i != p2) r.push_back(m[i]);
        return r;
    }

    static CoeffMonomial insert_sorted(CoeffMonomial m, const FunctionSymbol& s) {
        m.push_back(s);
        std::sort(m.begin(), m.end());
        return m;
    }

    // On Calabi-Yau geometry the mixed jets of the potential vanish, so a
    // Christoffel trace differentiated across types is a complete zero:
    //   sum_a Gamma^a_{a c, D} = g_{,c D} = 0   when {c} u D mixes classes
    std::optional<SumHit> try_mixed_trace_zero(const CoefficientExpr& e,
                                               const CoeffMonomial& mono,
                                               const Scalar& c) const {
        if (!cy_rules()) return std::nullopt;
        const int n = ctx.dim;
        for (size_t p = 0; p < mono.size(); ++p) {
            const auto& s = mono[p];
            if (s.kind != SymKind::Gamma || s.derivs.empty()) continue;
            Idx up = s.indices[0];
            for (int slot = 1; slot <= 2; ++slot) {
                if (!(s.indices[slot] == up)) continue;
                Idx other = s.indices[3 - slot];
                if (other.cls != up.cls) continue;
                bool mixed = false;
                for (auto& d : s.derivs)
                    if (d.cls != other.cls) mixed = true;
                if (!mixed) continue;
                CoeffMonomial rest = erase_one(mono, p);
                bool complete = true;
                std::vector<CoeffMonomial> members;
                for (int k = 1; k <= n && complete; ++k) {
                    Idx a{up.cls, k};
                    FunctionSymbol g =
                        make_sym(SymKind::Gamma, {a, a, other}, s.derivs);
                    if (g.canonicalize() == 0) continue;
                    CoeffMonomial m2 = insert_sorted(rest, g);
                    auto it = e.terms().find(m2);
                    if (it == e.terms().end() || !(it->second == c))
                        complete = false;
                    else members.push_back(m2);
                }
                if (!complete || members.empty()) continue;
                SumHit h;
                for (auto& m2 : members) h.removed.add_term(m2, c);
                return h;
            }
        }
        return std::nullopt;
    }

    // sum_m gup[m b] glo[m d] = delta_{b d}   (and the antiholomorphic twin)
    std::optional<SumHit> try_gg_contraction(const CoefficientExpr& e,
                                             const CoeffMonomial& mono,
                                             const Scalar& c) const {
        const int n = ctx.dim;
        for (size_t p = 0; p < mono.size(); ++p) {
            if (mono[p].kind != SymKind::GUp || !mono[p].derivs.empty()) continue;
            for (size_t q = 0; q < mono.size(); ++q) {
                if (q == p) continue;
                if (mono[q].kind != SymKind::GLo || !mono[q].derivs.empty()) continue;
                // canonical slots: (hol, antihol) for both
                for (int cslot = 0; cslot < 2; ++cslot) {
                    Idx du = mono[p].indices[cslot];
                    Idx dl = mono[q].indices[cslot];
                    if (!(du == dl)) continue;
                    Idx bu = mono[p].indices[1 - cslot];
                    Idx bl = mono[q].indices[1 - cslot];
                    CoeffMonomial rest = erase_two(mono, std::min(p, q), std::max(p, q));
                    bool complete = true;
                    std::vector<CoeffMonomial> members;
                    for (int k = 1; k <= n && complete; ++k) {
                        Idx m{du.cls, k};
                        std::vector<Idx> iu(2), il(2);
                        iu[cslot] = m; iu[1 - cslot] = bu;
                        il[cslot] = m; il[1 - cslot] = bl;
                        FunctionSymbol fu = make_sym(SymKind::GUp, iu);
                        FunctionSymbol fl = make_sym(SymKind::GLo, il);
                        CoeffMonomial m2 = insert_sorted(insert_sorted(rest, fu), fl);
                        auto it = e.terms().find(m2);
                        if (it == e.terms().end() || !(it->second == c)) complete = false;
                        else members.push_back(m2);
                    }
                    if (!complete) continue;
                    SumHit h;
                    for (auto& m2 : members) h.removed.add_term(m2, c);
                    if (bu == bl) h.replaced.add_term(rest, c);
                    return h;
                }
            }
        }
        return std::nullopt;
    }

    // sum_m eup[m b] elo[m d] = delta_{b d} within one type (hyperkahler)
    std::optional<SumHit> try_ee_contraction(const CoefficientExpr& e,
                                             const CoeffMonomial& mono,
                                             const Scalar& c) const {
        const int n = ctx.dim;
        for (size_t p = 0; p < mono.size(); ++p) {
            if (mono[p].kind != SymKind::EtaUp || !mono[p].derivs.empty()) continue;
            for (size_t q = 0; q < mono.size(); ++q) {
                if (q == p) continue;
                if (mono[q].kind != SymKind::EtaLo || !mono[q].derivs.empty()) continue;
                if (mono[p].indices[0].cls != mono[q].indices[0].cls) continue;
                IndexClass pc = mono[p].indices[0].cls;
                for (int su = 0; su < 2; ++su) {
                    for (int sl = 0; sl < 2; ++sl) {
                        Idx du = mono[p].indices[su];
                        Idx dl = mono[q].indices[sl];
                        if (!(du == dl)) continue;
                        Idx bu = mono[p].indices[1 - su];
                        Idx bl = mono[q].indices[1 - sl];
                        CoeffMonomial rest = erase_two(mono, std::min(p, q), std::max(p, q));
                        // sign to bring the dummy into slot 0 of each factor
                        int base_sign = (su == 1 ? -1 : 1) * (sl == 1 ? -1 : 1);
                        // index-form coefficient of the hypothesized sum
                        Scalar cidx = c * Scalar(base_sign);
                        bool complete = true;
                        std::vector<std::pair<CoeffMonomial, Scalar>> members;
                        for (int k = 1; k <= n && complete; ++k) {
                            Idx m{pc, k};
                            FunctionSymbol fu = make_sym(SymKind::EtaUp, {m, bu});
                            FunctionSymbol fl = make_sym(SymKind::EtaLo, {m, bl});
                            int s1 = fu.canonicalize();
                            int s2 = fl.canonicalize();
                            if (s1 == 0 || s2 == 0) continue;  // vanishing member
                            Scalar want = cidx * Scalar(s1 * s2);
                            CoeffMonomial m2 = insert_sorted(insert_sorted(rest, fu), fl);
                            auto it = e.terms().find(m2);
                            if (it == e.terms().end() || !(it->second == want))
                                complete = false;
                            else members.emplace_back(m2, want);
                        }
                        if (!complete || members.empty()) continue;
                        // guard: the found members must tile distinct monomials
                        std::set<CoeffMonomial> uniq;
                        for (auto& [m2, w] : members) uniq.insert(m2);
                        if (uniq.size() != members.size()) continue;
                        SumHit h;
                        for (auto& [m2, w] : members) h.removed.add_term(m2, w);
                        if (bu == bl) h.replaced.add_term(rest, cidx);
                        return h;
                    }
                }
            }
        }
        return std::nullopt;
    }

    // Compatibility of the symplectic pairing with the metric, both types
    // contracted through one metric factor:
    //   sum_{m nbar} elo[a m] gup[m nbar] elo[nbar bbar] = -glo[a bbar]
    //   sum_{m nbar} eup[a m] glo[m nbar] eup[nbar bbar] = -gup[a bbar]
    std::optional<SumHit> try_ege_contraction(const CoefficientExpr& e,
                                              const CoeffMonomial& mono,
                                              const Scalar& c, bool lower) const {
        const int n = ctx.dim;
        const SymKind eta_k = lower ? SymKind::EtaLo : SymKind::EtaUp;
        const SymKind mid_k = lower ? SymKind::GUp : SymKind::GLo;
        const SymKind out_k = lower ? SymKind::GLo : SymKind::GUp;
        for (size_t q = 0; q < mono.size(); ++q) {
            if (mono[q].kind != mid_k || !mono[q].derivs.empty()) continue;
            Idx mh = mono[q].indices[0];   // holomorphic slot
            Idx ma = mono[q].indices[1];   // antiholomorphic slot
            for (size_t p = 0; p < mono.size(); ++p) {
                if (p == q || mono[p].kind != eta_k || !mono[p].derivs.empty())
                    continue;
                if (mono[p].indices[0].cls != IndexClass::Hol) continue;
                for (size_t r = 0; r < mono.size(); ++r) {
                    if (r == p || r == q) continue;
                    if (mono[r].kind != eta_k || !mono[r].derivs.empty()) continue;
                    if (mono[r].indices[0].cls != IndexClass::AntiHol) continue;
                    for (int sp = 0; sp < 2; ++sp) {
                        if (!(mono[p].indices[sp] == mh)) continue;
                        Idx a = mono[p].indices[1 - sp];
                        for (int sr = 0; sr < 2; ++sr) {
                            if (!(mono[r].indices[sr] == ma)) continue;
                            Idx b = mono[r].indices[1 - sr];
                            CoeffMonomial rest;
                            for (size_t i = 0; i < mono.size(); ++i)
                                if (i != p && i != q && i != r)
                                    rest.push_back(mono[i]);
                            // index form wants the dummy in slot 1 of the
                            // holomorphic eta and slot 0 of the other
                            int base_sign = (sp == 1 ? 1 : -1) * (sr == 0 ? 1 : -1);
                            Scalar cidx = c * Scalar(base_sign);
                            bool complete = true;
                            std::vector<std::pair<CoeffMonomial, Scalar>> members;
                            for (int k1 = 1; k1 <= n && complete; ++k1) {
                                for (int k2 = 1; k2 <= n && complete; ++k2) {
                                    Idx m{IndexClass::Hol, k1};
                                    Idx nb{IndexClass::AntiHol, k2};
                                    FunctionSymbol fp = make_sym(eta_k, {a, m});
                                    FunctionSymbol fq = make_sym(mid_k, {m, nb});
                                    FunctionSymbol fr = make_sym(eta_k, {nb, b});
                                    int s1 = fp.canonicalize();
                                    int s3 = fr.canonicalize();
                                    fq.canonicalize();
                                    if (s1 == 0 || s3 == 0) continue;
                                    Scalar want = cidx * Scalar(s1 * s3);
                                    CoeffMonomial m2 = insert_sorted(
                                        insert_sorted(insert_sorted(rest, fp), fq), fr);
                                    auto it = e.terms().find(m2);
                                    if (it == e.terms().end() || !(it->second == want))
                                        complete = false;
                                    else members.emplace_back(m2, want);
                                }
                            }
                            if (!complete || members.empty()) continue;
                            std::set<CoeffMonomial> uniq;
                            for (auto& [m2, w] : members) uniq.insert(m2);
                            if (uniq.size() != members.size()) continue;
                            SumHit h;
                            for (auto& [m2, w] : members) h.removed.add_term(m2, w);
                            FunctionSymbol out = make_sym(out_k, {a, b});
                            out.canonicalize();
                            h.replaced.add_term(insert_sorted(rest, out),
                                                cidx * Scalar(-1));
                            return h;
                        }
                    }
                }
            }
        }
        return std::nullopt;
    }

    // Both indices of the pairing moved through two metric factors, which
    // flips its type within one index class:
    //   sum_{m n} gup[a m] elo[m n] gup[b n] = eup[a b]
    //   sum_{m n} glo[a m] eup[m n] glo[b n] = elo[a b]
    std::optional<SumHit> try_geg_contraction(const CoefficientExpr& e,
                                              const CoeffMonomial& mono,
                                              const Scalar& c, bool lower) const {
        const int n = ctx.dim;
        const SymKind inn_k = lower ? SymKind::EtaUp : SymKind::EtaLo;
        const SymKind out_k = lower ? SymKind::EtaLo : SymKind::EtaUp;
        const SymKind met_k = lower ? SymKind::GLo : SymKind::GUp;
        for (size_t q = 0; q < mono.size(); ++q) {
            if (mono[q].kind != inn_k || !mono[q].derivs.empty()) continue;
            IndexClass dc = mono[q].indices[0].cls;
            if (mono[q].indices[1].cls != dc) continue;
            // metric is stored (hol, antihol); the dummy slot follows dc
            const int ds = dc == IndexClass::Hol ? 0 : 1;
            for (size_t p = 0; p < mono.size(); ++p) {
                if (p == q || mono[p].kind != met_k || !mono[p].derivs.empty())
                    continue;
                if (!(mono[p].indices[ds] == mono[q].indices[0])) continue;
                Idx a = mono[p].indices[1 - ds];
                for (size_t r = 0; r < mono.size(); ++r) {
                    if (r == p || r == q) continue;
                    if (mono[r].kind != met_k || !mono[r].derivs.empty()) continue;
                    if (!(mono[r].indices[ds] == mono[q].indices[1])) continue;
                    Idx b = mono[r].indices[1 - ds];
                    CoeffMonomial rest;
                    for (size_t i = 0; i < mono.size(); ++i)
                        if (i != p && i != q && i != r) rest.push_back(mono[i]);
                    bool complete = true;
                    std::vector<std::pair<CoeffMonomial, Scalar>> members;
                    for (int k1 = 1; k1 <= n && complete; ++k1) {
                        for (int k2 = 1; k2 <= n && complete; ++k2) {
                            Idx d1{dc, k1}, d2{dc, k2};
                            std::vector<Idx> ip(2), ir(2);
                            ip[ds] = d1; ip[1 - ds] = a;
                            ir[ds] = d2; ir[1 - ds] = b;
                            FunctionSymbol fp = make_sym(met_k, ip);
                            FunctionSymbol fr = make_sym(met_k, ir);
                            FunctionSymbol fi = make_sym(inn_k, {d1, d2});
                            int s = fi.canonicalize();
                            if (s == 0) continue;
                            Scalar want = c * Scalar(s);
                            CoeffMonomial m2 = insert_sorted(
                                insert_sorted(insert_sorted(rest, fp), fr), fi);
                            auto it = e.terms().find(m2);
                            if (it == e.terms().end() || !(it->second == want))
                                complete = false;
                            else members.emplace_back(m2, want);
                        }
                    }
                    if (!complete || members.empty()) continue;
                    std::set<CoeffMonomial> uniq;
                    for (auto& [m2, w] : members) uniq.insert(m2);
                    if (uniq.size() != members.size()) continue;
                    SumHit h;
                    for (auto& [m2, w] : members) h.removed.add_term(m2, w);
                    FunctionSymbol out = make_sym(out_k, {a, b});
                    int so = out.canonicalize();
                    if (so != 0)
                        h.replaced.add_term(insert_sorted(rest, out),
                                            c * Scalar(so));
                    return h;
                }
            }
        }
        return std::nullopt;
    }

    // The pairing with one index raised can sit on either side of the
    // metric.  Rewrites the lowered-pairing form into the raised one:
    //   sum_g elo[a g] gup[g bbar] = - sum_d glo[a d] eup[bbar d]
    // together with its conjugate.
    std::optional<SumHit> try_eg_flip(const CoefficientExpr& e,
                                      const CoeffMonomial& mono,
                                      const Scalar& c) const {
        const int n = ctx.dim;
        for (size_t p = 0; p < mono.size(); ++p) {
            if (mono[p].kind != SymKind::EtaLo || !mono[p].derivs.empty())
                continue;
            IndexClass pc = mono[p].indices[0].cls;
            if (mono[p].indices[1].cls != pc) continue;
            // metric slots are (hol, antihol); the dummy slot follows pc
            const int gs = pc == IndexClass::Hol ? 0 : 1;
            for (size_t q = 0; q < mono.size(); ++q) {
                if (q == p || mono[q].kind != SymKind::GUp ||
                    !mono[q].derivs.empty())
                    continue;
                for (int sp = 0; sp < 2; ++sp) {
                    if (!(mono[p].indices[sp] == mono[q].indices[gs])) continue;
                    Idx a = mono[p].indices[1 - sp];
                    Idx b = mono[q].indices[1 - gs];
                    CoeffMonomial rest =
                        erase_two(mono, std::min(p, q), std::max(p, q));
                    // index form keeps the dummy in slot 1 of the pairing
                    Scalar cidx = c * Scalar(sp == 0 ? -1 : 1);
                    bool complete = true;
                    std::vector<std::pair<CoeffMonomial, Scalar>> members;
                    for (int k = 1; k <= n && complete; ++k) {
                        Idx g{pc, k};
                        FunctionSymbol fe = make_sym(SymKind::EtaLo, {a, g});
                        int s1 = fe.canonicalize();
                        if (s1 == 0) continue;
                        std::vector<Idx> ig(2);
                        ig[gs] = g; ig[1 - gs] = b;
                        FunctionSymbol fg = make_sym(SymKind::GUp, ig);
                        Scalar want = cidx * Scalar(s1);
                        CoeffMonomial m2 = insert_sorted(insert_sorted(rest, fe), fg);
                        auto it = e.terms().find(m2);
                        if (it == e.terms().end() || !(it->second == want))
                            complete = false;
                        else members.emplace_back(m2, want);
                    }
                    if (!complete || members.empty()) continue;
                    std::set<CoeffMonomial> uniq;
                    for (auto& [m2, w] : members) uniq.insert(m2);
                    if (uniq.size() != members.size()) continue;
                    SumHit h;
                    for (auto& [m2, w] : members) h.removed.add_term(m2, w);
                    IndexClass oc = pc == IndexClass::Hol ? IndexClass::AntiHol
                                                          : IndexClass::Hol;
                    for (int k = 1; k <= n; ++k) {
                        Idx d{oc, k};
                        FunctionSymbol fe2 = make_sym(SymKind::EtaUp, {b, d});
                        int s2 = fe2.canonicalize();
                        if (s2 == 0) continue;
                        std::vector<Idx> il(2);
                        il[gs] = a; il[1 - gs] = d;
                        FunctionSymbol fl = make_sym(SymKind::GLo, il);
                        h.replaced.add_term(
                            insert_sorted(insert_sorted(rest, fl), fe2),
                            cidx * Scalar(-1) * Scalar(s2));
                    }
                    return h;
                }
            }
        }
        return std::nullopt;
    }

    // ---- Christoffel derivative exchange -------------------------------

    // Gamma^a_{b c, d ...}: if some derivative index is smaller than the
    // larger lower index, move it into the pair.  The correction terms come
    // from the symmetry of Gamma^a_{bc,d} + Gamma^a_{de} Gamma^e_{bc}.
    std::optional<CoefficientExpr> gamma_exchange(const FunctionSymbol& s) const {
        if (s.kind != SymKind::Gamma || s.derivs.empty()) return std::nullopt;
        IndexClass pc = s.indices[0].cls;
        Idx lo1 = s.indices[1], lo2 = s.indices[2];
        // pick the smallest same-type derivative index
        int best = -1;
        for (size_t i = 0; i < s.derivs.size(); ++i) {
            if (s.derivs[i].cls != pc) continue;
            if (best < 0 || s.derivs[i] < s.derivs[best]) best = (int)i;
        }
        if (best < 0) return std::nullopt;
        Idx d = s.derivs[best];
        if (!(d < lo2)) return std::nullopt;  // already canonical
        std::vector<Idx> restD;
        for (size_t i = 0; i < s.derivs.size(); ++i)
            if ((int)i != best) restD.push_back(s.derivs[i]);

        const int n = ctx.dim;
        Idx up = s.indices[0], b = lo1, g = lo2;
        auto gam = [&](Idx u, Idx l1, Idx l2, std::vector<Idx> dd = {}) {
            return CoefficientExpr::symbol(make_sym(SymKind::Gamma, {u, l1, l2}, dd));
        };
        // Gamma^a_{bg,d} = Gamma^a_{bd,g} + sum_e ( Gamma^a_{ge} Gamma^e_{bd}
        //                                          - Gamma^a_{de} Gamma^e_{bg} )
        CoefficientExpr e = gam(up, b, d, {g});
        for (int k = 1; k <= n; ++k) {
            Idx eps{pc, k};
            e += gam(up, g, eps) * gam(eps, b, d);
            e += CoefficientExpr(Scalar(-1)) * gam(up, d, eps) * gam(eps, b, g);
        }
        for (auto& r : restD) e = e.diff_raw(r);
        return e;
    }

    // ---- the driver -----------------------------------------------------

    // one pass of per-factor rules, worklist style
    CoefficientExpr local_pass(CoefficientExpr work, long& steps) const {
        CoefficientExpr out;
        while (!work.is_zero()) {
            auto [mono, c] = work.pop_first();
            bool fired = false;
            for (size_t p = 0; p < mono.size(); ++p) {
                auto r = local_rule(mono[p]);
                if (!r) continue;
                bump(steps, mono[p]);
                CoefficientExpr tail;
                tail.add_term(erase_one(mono, p), c);
                work += *r * tail;
                fired = true;
                break;
            }
            if (!fired) out.add_term(mono, c);
        }
        return out;
    }

    CoefficientExpr normalize_impl(const CoefficientExpr& start, long& steps) const {
        CoefficientExpr e = local_pass(start, steps);
        bool changed = true;
        while (changed) {
            changed = false;

            // whole-sum contractions
            while (auto h = sum_rule(e)) {
                bump(steps);
                e -= h->removed;
                e += h->replaced;
                e = local_pass(std::move(e), steps);
                changed = true;
            }

            // derivative exchange on Gamma
            if (!kahler_family()) break;
            bool exch = false;
            for (auto& [mono, c] : e.terms()) {
                for (size_t p = 0; p < mono.size(); ++p) {
                    auto r = gamma_exchange(mono[p]);
                    if (!r) continue;
                    bump(steps, mono[p]);
                    CoefficientExpr tail;
                    tail.add_term(erase_one(mono, p), c);
                    CoefficientExpr repl = *r * tail;
                    CoefficientExpr removed;
                    removed.add_term(mono, c);
                    e -= removed;
                    e += local_pass(std::move(repl), steps);
                    exch = true;
                    changed = true;
                    break;
                }
                if (exch) break;
            }
        }
        return e;
    }

    void bump(long& steps) const {
        if (++steps > max_steps)
            throw budget_error("rewrite budget exhausted on backend " + name);
    }
    void bump(long& steps, const FunctionSymbol& s) const {
        if (++steps > max_steps)
            throw budget_error("rewrite budget exhausted on backend " + name +
                               " at symbol " + to_string_sym(s));
    }

    static std::string to_string_sym(const FunctionSymbol& s) {
        return to_string(s);
    }
};

}  // namespace sva
