/**
 * @file  test_expr.cpp
 * @brief Unit and property tests for the symbolic expression layer.
 *
 * Oracle notes:
 *  - The derivative of 6z/(x+y)^2 is cross-checked two ways: against the
 *    closed form -12z/(x+y)^3 via the zero-test oracle, and against central
 *    finite differences (h = 1e-5, relative error < 1e-6) at admissible
 *    sample points, so neither the derivative nor the zero test is trusted
 *    on its own.
 *  - Evaluation examples use hand arithmetic: 6*2/(1+1)^2 = 3.
 */
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "eds/expr.hpp"

#include <cmath>
#include <random>

using namespace eds;

namespace {

SymbolTableView chart_xyz() {
    return SymbolTableView::of_names({"x", "y", "z", "p", "q", "r", "t"});
}

Expr P(const std::string& text) {
    return parse_expr(text, chart_xyz());
}

EvalPoint point(std::initializer_list<std::pair<const char*, double>> vals) {
    EvalPoint p;
    for (const auto& [name, v] : vals) {
        p.set(Symbols::intern(name), v);
    }
    return p;
}

} // namespace

TEST_CASE("parse: shapes of the reference expressions") {
    // t - q^2/2: two terms, exact rational -1/2 on the q^2 term.
    const Expr e = P("t - q^2/2");
    REQUIRE(e.terms().size() == 2);
    const Expr rebuilt =
        Expr::symbol("t") - Expr::constant(Rational(1, 2)) * Expr::symbol("q").pow(2);
    CHECK(e.equals(rebuilt));

    // A single identifier is a coefficient-one, power-one monomial.
    const Expr x = P("x");
    REQUIRE(x.terms().size() == 1);
    CHECK(x.terms().front().coef == 1);
    REQUIRE(x.terms().front().factors.size() == 1);
    CHECK(x.terms().front().factors.front().power == 1);

    // 6*z/(x+y)^2 evaluates per the standard reading (value checked below).
    const Expr sigma = P("6*z/(x+y)^2");
    CHECK_FALSE(sigma.is_literal_zero());
}

TEST_CASE("parse: rational and decimal numbers") {
    CHECK(P("1/2").constant_value() == Rational(1, 2));
    CHECK(P("0.25").constant_value() == Rational(1, 4));
    CHECK(P("3").constant_value() == Rational(3));
    CHECK(P("-5/10").constant_value() == Rational(-1, 2));
    CHECK(P("1/2 + 1/3").constant_value() == Rational(5, 6));
}

TEST_CASE("parse: errors carry byte offsets and symbol names") {
    CHECK_THROWS_AS(P("t - * q"), ParseError);
    try {
        P("t - * q");
    } catch (const ParseError& err) {
        CHECK(err.offset() == 4);
    }

    try {
        P("q + foo*2");
        FAIL("undeclared symbol accepted");
    } catch (const ParseError& err) {
        CHECK(std::string(err.what()).find("foo") != std::string::npos);
        CHECK(err.offset() == 4);
    }

    CHECK_THROWS_AS(P("(x+y"), ParseError);
    CHECK_THROWS_AS(P("x^y"), ParseError); // exponents are integers
    CHECK_THROWS_AS(P(""), ParseError);
}

TEST_CASE("differentiate: polynomial and independence rules") {
    const int q = Symbols::intern("q");
    const int x = Symbols::intern("x");

    CHECK(differentiate(P("t - q^2/2"), q).equals(-Expr::symbol("q")));
    CHECK(differentiate(P("exp(z)"), x).is_literal_zero());
    CHECK(differentiate(P("x^3"), x).equals(P("3*x^2")));
    CHECK(differentiate(P("sin(x)"), x).equals(P("cos(x)")));
    CHECK(differentiate(P("cos(x)"), x).equals(P("-sin(x)")));
    CHECK(differentiate(P("exp(2*x)"), x).equals(P("2*exp(2*x)")));
    CHECK(differentiate(P("ln(x)"), x).equals(P("1/x")));
}

TEST_CASE("differentiate: quotient expression against closed form and finite differences") {
    const int x = Symbols::intern("x");
    const Expr sigma = P("6*z/(x+y)^2");
    const Expr dx_sigma = differentiate(sigma, x);
    const Expr closed = P("-12*z/(x+y)^3");

    SamplingPolicy policy = SamplingPolicy::over_symbols(
        {Symbols::intern("x"), Symbols::intern("y"), Symbols::intern("z")});
    policy.exclusions.push_back(P("x+y"));
    policy.exclusion_floor = 0.5; // keep clear of the singular locus for tight relative checks

    const ZeroVerdict same = is_zero(dx_sigma - closed, policy);
    CHECK(same.is_zero());

    // Central finite differences, h = 1e-5: truncation O(h^2), roundoff O(eps/h),
    // both far below the 1e-6 relative gate at points with |x+y| > 0.5.
    const double h = 1e-5;
    const auto pts = policy.sample_points();
    REQUIRE(pts.size() >= 8);
    for (const EvalPoint& p0 : pts) {
        EvalPoint plus = p0;
        EvalPoint minus = p0;
        plus.set(x, p0.value_of(x) + h);
        minus.set(x, p0.value_of(x) - h);
        const double fd = (eval_at(sigma, plus) - eval_at(sigma, minus)) / (2 * h);
        const double sym = eval_at(dx_sigma, p0);
        CHECK(std::abs(fd - sym) <= 1e-6 * std::max(1.0, std::abs(sym)));
    }
}

TEST_CASE("eval_at: reference values") {
    CHECK(eval_at(P("(x+y)^2"), point({{"x", 1}, {"y", 2}})) == doctest::Approx(9.0).epsilon(1e-14));
    CHECK(eval_at(P("exp(z)"), point({{"z", 0}})) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(eval_at(P("6*z/(x+y)^2"), point({{"x", 1}, {"y", 1}, {"z", 2}})) ==
          doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("eval_at: singular evaluations are reported") {
    CHECK_THROWS_AS(eval_at(P("1/x"), point({{"x", 0}})), SingularEvaluation);
    CHECK_THROWS_AS(eval_at(P("ln(x)"), point({{"x", -1}})), SingularEvaluation);
    CHECK_THROWS_AS(eval_at(P("sqrt(x)"), point({{"x", -4}})), SingularEvaluation);
    CHECK_THROWS_AS(eval_at(P("x + q"), point({{"x", 1}})), SingularEvaluation); // q unassigned
    CHECK_THROWS_AS(P("x").pow(-1).substitute(Symbols::intern("x"), Expr()), SingularEvaluation);
}

TEST_CASE("is_zero: symbolic certificates from normalization") {
    SamplingPolicy policy = SamplingPolicy::over_symbols(
        {Symbols::intern("x"), Symbols::intern("y")});

    const ZeroVerdict binomial = is_zero(P("(x+y)^2 - x^2 - 2*x*y - y^2"), policy);
    CHECK(binomial.is_zero());
    CHECK(binomial.certification == Certification::Symbolic);

    // exp(x)*exp(-x) merges to exp(0) = 1 during normalization.
    const ZeroVerdict expid = is_zero(P("exp(x)*exp(-x) - 1"), policy);
    CHECK(expid.is_zero());
    CHECK(expid.certification == Certification::Symbolic);
}

TEST_CASE("is_zero: nonzero expressions produce witnesses") {
    SamplingPolicy policy = SamplingPolicy::over_symbols(
        {Symbols::intern("x"), Symbols::intern("y")});
    const ZeroVerdict v = is_zero(P("x - y"), policy);
    CHECK(v.is_nonzero());
    REQUIRE(v.witness.has_value());
    const double wx = v.witness->value_of(Symbols::intern("x"));
    const double wy = v.witness->value_of(Symbols::intern("y"));
    CHECK(std::abs((wx - wy) - v.witness_value) <= 1e-12 * std::max(1.0, std::abs(wx - wy)));
}

TEST_CASE("is_zero: numeric certificate for structurally different equal forms") {
    SamplingPolicy policy = SamplingPolicy::over_symbols(
        {Symbols::intern("x"), Symbols::intern("y"), Symbols::intern("z")});
    policy.exclusions.push_back(P("x+y"));
    const ZeroVerdict v = is_zero(P("6*z/(x+y)^2") - P("6*z*(x+y)^-2"), policy);
    CHECK(v.is_zero());
}

TEST_CASE("is_zero: inadmissible policies give Unknown") {
    SamplingPolicy policy = SamplingPolicy::over_symbols({Symbols::intern("x")});
    policy.exclusions.push_back(Expr()); // |0| never exceeds the floor: no admissible points
    policy.max_draws = 64;
    const ZeroVerdict v = is_zero(P("x"), policy);
    CHECK(v.is_unknown());
}

TEST_CASE("is_zero: transcendental identity certified numerically") {
    SamplingPolicy policy = SamplingPolicy::over_symbols({Symbols::intern("x")});
    const ZeroVerdict v = is_zero(P("sin(x)^2 + cos(x)^2 - 1"), policy);
    CHECK(v.is_zero());
    CHECK(v.certification == Certification::Numeric);
}

namespace {

/// Expression pool used by the property suites; exclusions keep samples off
/// the singular loci of the pooled denominators.
std::vector<Expr> property_pool() {
    return {
        P("x"),
        P("t - q^2/2"),
        P("6*z/(x+y)^2"),
        P("q*exp(z)"),
        P("sin(x)*cos(y)"),
        P("sqrt(x^2+1)"),
        P("(x - y)^3/(x+y)"),
        P("ln(x^2+1)"),
        P("1/2*x - 3*y^2 + z*t"),
        P("exp(x)*exp(y) + exp(x+y)"),
    };
}

SamplingPolicy pool_policy() {
    SamplingPolicy policy = SamplingPolicy::over_symbols(
        {Symbols::intern("x"), Symbols::intern("y"), Symbols::intern("z"),
         Symbols::intern("q"), Symbols::intern("t")});
    policy.exclusions.push_back(P("x+y"));
    return policy;
}

} // namespace

TEST_CASE("property: derivative linearity over random rational weights") {
    const auto pool = property_pool();
    const SamplingPolicy policy = pool_policy();
    std::mt19937_64 rng(20260815);
    std::uniform_int_distribution<int> num(-9, 9);
    std::uniform_int_distribution<int> den(1, 7);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const std::vector<int> vars = {Symbols::intern("x"), Symbols::intern("y"),
                                   Symbols::intern("q")};

    for (int trial = 0; trial < 20; ++trial) {
        const Expr& e1 = pool[pick(rng)];
        const Expr& e2 = pool[pick(rng)];
        const Expr a = Expr::constant(Rational(num(rng), den(rng)));
        const Expr b = Expr::constant(Rational(num(rng), den(rng)));
        const int v = vars[trial % vars.size()];
        const Expr defect = differentiate(a * e1 + b * e2, v) -
                            a * differentiate(e1, v) - b * differentiate(e2, v);
        const ZeroVerdict verdict = is_zero(defect, policy);
        CHECK(verdict.is_zero());
    }
}

TEST_CASE("property: Leibniz rule over pool pairs") {
    const auto pool = property_pool();
    const SamplingPolicy policy = pool_policy();
    const std::vector<int> vars = {Symbols::intern("x"), Symbols::intern("y"),
                                   Symbols::intern("t")};
    int caseno = 0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        for (std::size_t j = i; j < pool.size(); j += 3) {
            const int v = vars[caseno++ % vars.size()];
            const Expr defect = differentiate(pool[i] * pool[j], v) -
                                pool[i] * differentiate(pool[j], v) -
                                pool[j] * differentiate(pool[i], v);
            CHECK(is_zero(defect, policy).is_zero());
        }
    }
}

TEST_CASE("property: parse/print round trip evaluates identically") {
    const auto pool = property_pool();
    const SamplingPolicy policy = pool_policy();
    const auto pts = policy.sample_points();
    REQUIRE(pts.size() >= 8);
    for (const Expr& e : pool) {
        const Expr reparsed = parse_expr(e.print(), chart_xyz());
        CHECK(reparsed.equals(e)); // normalization is path-independent here
        for (const EvalPoint& p : pts) {
            const double a = eval_at(e, p);
            const double b = eval_at(reparsed, p);
            CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
        }
    }
}

TEST_CASE("property: normalization is idempotent under identity operations") {
    for (const Expr& e : property_pool()) {
        CHECK((e + Expr()).equals(e));
        CHECK((e * Expr::constant(1)).equals(e));
        CHECK((e - e).is_literal_zero());
        CHECK((-(-e)).equals(e));
    }
}

TEST_CASE("property: is_zero is deterministic for a fixed seed") {
    SamplingPolicy policy = pool_policy();
    policy.seed = 0xfeedface;
    const Expr e = P("sin(x)*cos(y) - 1/3");
    const ZeroVerdict v1 = is_zero(e, policy);
    const ZeroVerdict v2 = is_zero(e, policy);
    CHECK(v1.verdict == v2.verdict);
    REQUIRE(v1.witness.has_value());
    REQUIRE(v2.witness.has_value());
    CHECK(v1.witness_value == v2.witness_value);
    CHECK(v1.witness->values == v2.witness->values);

    const auto pts1 = policy.sample_points();
    const auto pts2 = policy.sample_points();
    REQUIRE(pts1.size() == pts2.size());
    for (std::size_t i = 0; i < pts1.size(); ++i) {
        CHECK(pts1[i].values == pts2[i].values);
    }
}

TEST_CASE("compiled evaluation agrees with tree evaluation") {
    const auto pool = property_pool();
    SamplingPolicy policy = pool_policy();
    const auto pts = policy.sample_points();
    REQUIRE(!pts.empty());
    const std::vector<int> slots = policy.symbol_ids;
    for (const Expr& e : pool) {
        const CompiledExpr ce(e, slots);
        for (const EvalPoint& p : pts) {
            std::vector<double> vals(slots.size());
            for (std::size_t i = 0; i < slots.size(); ++i) {
                vals[i] = p.value_of(slots[i]);
            }
            const double a = eval_at(e, p);
            const double b = ce.eval(vals.data());
            CHECK(std::abs(a - b) <= 1e-11 * std::max(1.0, std::abs(a)));
        }
    }
}

TEST_CASE("substitution renormalizes") {
    const Expr e = P("t - q^2/2");
    const Expr sub = e.substitute(Symbols::intern("q"), P("x+y"));
    CHECK(sub.equals(P("t - (x^2 + 2*x*y + y^2)/2")));
    CHECK(P("x^2").substitute(Symbols::intern("x"), Expr::constant(3)).constant_value() ==
          Rational(9));
}

TEST_CASE("exponent arithmetic stays exact") {
    CHECK(P("(1/3)^3").constant_value() == Rational(1, 27));
    CHECK(P("2^-2").constant_value() == Rational(1, 4));
    CHECK(P("x^2*x^-2").constant_value() == Rational(1));
    CHECK(P("exp(x)^3*exp(-3*x)").constant_value() == Rational(1));
    CHECK_THROWS_AS(P("1/0"), SingularEvaluation);
    CHECK_THROWS_AS(P("0^-1"), SingularEvaluation);
}
