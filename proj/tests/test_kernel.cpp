#include <catch2/catch_amalgamated.hpp>

#include "sva/coeff.hpp"
#include "sva/fields.hpp"
#include "sva/lambda.hpp"

using namespace sva;

TEST_CASE("gaussian rational scalars") {
    Scalar a(3), b = rat(1, 2);
    CHECK(to_string(a + b) == "7/2");
    CHECK((Scalar::i() * Scalar::i()) == Scalar(-1));
    Scalar z = Scalar(1) + Scalar::i();
    CHECK(to_string(z * z) == "2i");
    CHECK(z / z == Scalar(1));
    Scalar w = Scalar(2) - Scalar(3) * Scalar::i();
    CHECK(w.conj() == Scalar(2) + Scalar(3) * Scalar::i());
    CHECK((w * w.conj()).re == Rational(13));
    CHECK(factorial(5) == Rational(120));
}

TEST_CASE("index ordering and conjugation") {
    Idx h{IndexClass::Hol, 1}, hb{IndexClass::AntiHol, 1};
    CHECK(h < hb);
    CHECK(conj(h) == hb);
    CHECK(conj(conj(h)) == h);
    IndexContext ctx{true, 2};
    CHECK(ctx.all().size() == 4);
    CHECK(ctx.of_class(IndexClass::Hol).size() == 2);
}

TEST_CASE("symbol canonicalization") {
    Idx a1{IndexClass::Hol, 1}, a2{IndexClass::Hol, 2};
    Idx b1{IndexClass::AntiHol, 1};

    FunctionSymbol g = make_sym(SymKind::GLo, {b1, a1});
    CHECK(g.canonicalize() == 1);
    CHECK(g.indices[0] == a1);

    FunctionSymbol w = make_sym(SymKind::WLo, {a2, a1});
    CHECK(w.canonicalize() == -1);
    CHECK(w.indices[0] == a1);

    FunctionSymbol w2 = make_sym(SymKind::WLo, {a1, a1});
    CHECK(w2.canonicalize() == 0);

    FunctionSymbol gam = make_sym(SymKind::Gamma, {a1, a2, a1});
    CHECK(gam.canonicalize() == 1);
    CHECK(gam.indices[1] == a1);
    CHECK(gam.indices[2] == a2);

    FunctionSymbol gb = make_sym(SymKind::GBold, {}, {a2, a1});
    CHECK(gb.canonicalize() == 1);
    CHECK(gb.derivs[0] == a1);
}

TEST_CASE("coefficient ring arithmetic") {
    Idx a1{IndexClass::Hol, 1}, b1{IndexClass::AntiHol, 1};
    CoefficientExpr g = CoefficientExpr::symbol(make_sym(SymKind::GLo, {a1, b1}));
    CoefficientExpr two(Scalar(2));
    CoefficientExpr p = g + g;
    CHECK(p == two * g);
    CHECK((p - p).is_zero());
    CoefficientExpr q = g * g;
    CHECK(q.size() == 1);
    CHECK(q.terms().begin()->first.size() == 2);

    CoefficientExpr d = g.diff_raw(a1);
    CHECK(d.size() == 1);
    CHECK(d.terms().begin()->first[0].derivs.size() == 1);

    CoefficientExpr gc = g.conjugated();
    CHECK(gc == g);  // indices swap classes and re-sort to the same symbol

    CoefficientExpr w = CoefficientExpr::symbol(make_sym(SymKind::WLo, {a1, b1}), Scalar::i());
    CoefficientExpr wc = w.conjugated();
    CHECK(wc == w);  // antisymmetric swap cancels the conjugated i
}

static FieldExpr fnum(long n) { return FieldExpr(CoefficientExpr(Scalar(n))); }

TEST_CASE("lambda polynomial calculus") {
    LambdaPoly<FieldExpr> p;
    p.add(0, 0, fnum(1));
    p.add(1, 1, fnum(2));

    auto chi_p = lp_mul_chi(p);
    CHECK(lp_coeff(chi_p, 0, 1) == fnum(1));
    CHECK(lp_coeff(chi_p, 2, 0) == fnum(-4));  // 2! times the entry

    // chi^2 = -lambda
    auto chichi = lp_mul_chi(lp_mul_chi(p));
    auto mlam = lp_mul_lambda(p).scaled(Scalar(-1));
    CHECK(chichi == mlam);

    LambdaPoly<FieldExpr> q;
    q.add(2, 1, fnum(6));
    auto iq = lp_integrate(q);
    CHECK(lp_coeff(iq, 3, 0) == fnum(12));  // 6/3 * 3!

    auto nochi = lp_integrate(p);
    CHECK(lp_coeff(nochi, 2, 0) == fnum(2));  // entry 1 times 2!
    CHECK(nochi.t.size() == 1);
}

TEST_CASE("skew substitution on constant coefficients") {
    // with T = 0 on constants, the substitution is Lambda -> -Lambda
    auto Tz = [](const FieldExpr& v) {
        (void)v;
        return FieldExpr{};
    };
    auto Sz = Tz;
    LambdaPoly<FieldExpr> p;
    p.add(1, 0, fnum(1));
    p.add(0, 1, fnum(3));
    auto r = lp_skew_substitute(p, 1, Tz, Sz);
    CHECK(lp_coeff(r, 1, 0) == fnum(-1));
    CHECK(lp_coeff(r, 0, 1) == fnum(-3));
}

TEST_CASE("field expression container") {
    Idx x1{IndexClass::Real, 1};
    FieldExpr e = FieldExpr::gen(gB(x1));
    FieldExpr f = FieldExpr::gen(gPsi(x1));
    FieldExpr sum = e + f;
    CHECK(sum.size() == 2);
    CHECK((sum - e - f).is_zero());
    int par = -1;
    CHECK(!sum.homogeneous(&par));
    CHECK(f.homogeneous(&par));
    CHECK(par == 1);
    CHECK(word_weight({gSB(x1), gTPsi(x1)}) == Rational(2));
    CHECK(to_string(FieldExpr::gen(gSB(x1))) == "SB[x1]");
}
