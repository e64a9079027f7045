#include "fraclap/hypotheses.hpp"

#include <gtest/gtest.h>

using namespace fraclap;

TEST(Expression, ParsesAndEvaluates) {
    EXPECT_DOUBLE_EQ(Expression::parse("t/(1+t^2)")(2.0), 0.4);
    EXPECT_DOUBLE_EQ(Expression::parse("-t^2")(3.0), -9.0);
    EXPECT_DOUBLE_EQ(Expression::parse("2^3^2")(0.0), 512.0);
    EXPECT_NEAR(Expression::parse("ln(1+abs(t)) * exp(-t)")(-1.0), std::log(2.0) * std::exp(1.0), 1e-15);
    EXPECT_DOUBLE_EQ(Expression::parse(" 1.5e1 - 3 * t ")(1.0), 12.0);
    EXPECT_THROW(Expression::parse("t +"), ConfigError);
    EXPECT_THROW(Expression::parse("sin(t)"), ConfigError);
    EXPECT_THROW(Expression::parse("(t"), ConfigError);
    EXPECT_THROW(Expression::parse("t t"), ConfigError);
}

TEST(Nonlinearity, TruncationExtendsByValueAtZero) {
    const auto sat = Nonlinearity::saturating().truncated();
    EXPECT_EQ(sat.f(-5.0), 0.0);
    EXPECT_EQ(sat.F(-5.0), 0.0);
    const auto lin = Nonlinearity::expression("1 + t", 1.0).truncated();
    EXPECT_EQ(lin.f(-3.0), 1.0);
    EXPECT_NEAR(lin.F(-3.0), -3.0, 1e-15);
    EXPECT_NEAR(lin.F(2.0), 4.0, 1e-13);
    const auto twice = lin.truncated();
    for (double t : {-7.0, -0.1, 0.0, 0.3, 9.0}) {
        EXPECT_EQ(twice.f(t), lin.f(t));
        EXPECT_EQ(twice.F(t), lin.F(t));
    }
}

TEST(Nonlinearity, QuadratureMatchesClosedForms) {
    const auto sat = Nonlinearity::saturating(3.0);
    for (double x = -1000.0; x <= 1000.0; x += 37.3) EXPECT_NEAR(sat.F_by_quadrature(x), sat.F(x), 1e-10);
    for (double x : {-2.5, -0.01, 0.5, 1.0, 7.0}) EXPECT_NEAR(sat.F_by_quadrature(x), sat.F(x), 1e-10);
    for (double p : {1.5, 2.0, 4.0}) {
        const auto pw = Nonlinearity::power(p);
        for (double x = -1000.0; x <= 1000.0; x += 37.3)
            EXPECT_NEAR(pw.F_by_quadrature(x), pw.F(x), 1e-10 * std::max(1.0, std::abs(pw.F(x))));
    }
    EXPECT_EQ(Nonlinearity::power(3.0).F(0.0), 0.0);
}

TEST(ClassA, BoundedGrowth) {
    EXPECT_EQ(check_class_A(Nonlinearity::saturating(), kInf).verdict, Verdict::Pass);
    EXPECT_EQ(check_class_A(Nonlinearity::power(3.0), 4.0).verdict, Verdict::Pass);
    EXPECT_EQ(check_class_A(Nonlinearity::expression("exp(abs(t))", 2.0), kInf).verdict, Verdict::Fail);
    EXPECT_EQ(check_class_A(Nonlinearity::power(5.0), 4.0).verdict, Verdict::Fail);
}

TEST(Psi, DefaultMembership) {
    const auto psi = AuxFunction::default_power(2.0);
    EXPECT_EQ(psi.gamma_psi(), 1.0);
    for (const auto& c : check_psi_family(psi)) EXPECT_EQ(c.verdict, Verdict::Pass) << c.label;
}

TEST(Psi, ExpressionMembership) {
    const auto sq = AuxFunction::expression("t^2", 2.0);
    EXPECT_NEAR(sq.gamma_psi(), 1.0, 1e-12);
    for (const auto& c : check_psi_family(sq)) EXPECT_EQ(c.verdict, Verdict::Pass) << c.label;
    const auto neg = check_psi_family(AuxFunction::expression("-t^2", 2.0));
    EXPECT_EQ(neg[0].verdict, Verdict::Fail);
    EXPECT_EQ(neg[1].verdict, Verdict::Pass);
    EXPECT_EQ(check_psi_family(AuxFunction::expression("-abs(t)^3", 2.0))[1].verdict, Verdict::Fail);
    EXPECT_EQ(check_psi_family(AuxFunction::expression("abs(t)", 2.0))[2].verdict, Verdict::Fail);
    EXPECT_EQ(check_psi_family(AuxFunction::expression("abs(t)^3", 2.0))[2].verdict, Verdict::Fail);
}

TEST(H1, TruthTable) {
    EXPECT_EQ(check_h1(Nonlinearity::saturating(), 2.0).verdict, Verdict::Pass);
    for (double q : {1.5, 2.0, 3.0}) EXPECT_EQ(check_h1(Nonlinearity::power(q), q).verdict, Verdict::Fail) << q;
    EXPECT_EQ(check_h1(Nonlinearity::power(3.0), 2.0).verdict, Verdict::Fail);
    EXPECT_EQ(check_h1(Nonlinearity::expression("t^2", 3.0), 2.0).verdict, Verdict::Fail);
    EXPECT_EQ(check_h1(Nonlinearity::expression("t^0.5", 1.5), 2.0).verdict, Verdict::Pass);
}

TEST(H1, PassingForQImpliesDecayForLargerQ) {
    const auto sat = Nonlinearity::saturating();
    ASSERT_EQ(check_h1(sat, 2.0).verdict, Verdict::Pass);
    for (double q2 : {2.5, 3.0}) {
        double prev = kInf;
        for (double t : log_grid(6, 8, 16)) {
            const double v = sat.f(t) / std::pow(t, q2 - 1.0);
            EXPECT_LT(v, prev);
            prev = v;
        }
        EXPECT_LT(prev, 1e-12);
    }
}

TEST(H1, RejectsSmallSampleCount) { EXPECT_THROW(check_h1(Nonlinearity::saturating(), 2.0, 10), ConfigError); }

TEST(Liminf, ClosedFormCases) {
    const auto half = liminf_F_over_xi2_at_zero(Nonlinearity::saturating());
    EXPECT_FALSE(half.infinite);
    EXPECT_NEAR(half.value, 0.5, 1e-9);
    const auto cube = liminf_F_over_xi2_at_zero(Nonlinearity::power(3.0, 3.0));
    EXPECT_FALSE(cube.infinite);
    EXPECT_NEAR(cube.value, 0.0, 1e-12);
    EXPECT_TRUE(liminf_F_over_xi2_at_zero(Nonlinearity::power(1.0)).infinite);
}

TEST(AlphaThreshold, Values) {
    LiminfEstimate l;
    l.value = 0.5;
    EXPECT_DOUBLE_EQ(alpha_threshold(7.3, l), 7.3);
    l.value = 0.25;
    EXPECT_DOUBLE_EQ(alpha_threshold(2.0, l), 4.0);
    l.infinite = true;
    EXPECT_EQ(alpha_threshold(7.3, l), 0.0);
    LiminfEstimate zero;
    EXPECT_THROW(alpha_threshold(1.0, zero), HypothesisError);
}

TEST(H2, ScaledSaturating) {
    const double lambda1 = 6.2;
    // liminf of (alpha/2) ln(1+xi^2)/xi^2 is alpha/2
    EXPECT_EQ(check_h2(Nonlinearity::saturating(2 * lambda1), lambda1, 1.0).verdict, Verdict::Pass);
    const auto fail = check_h2(Nonlinearity::saturating(lambda1 / 2), lambda1, 1.0);
    EXPECT_EQ(fail.verdict, Verdict::Fail);
    EXPECT_NEAR(fail.value, lambda1 / 4, 1e-8);
    EXPECT_EQ(check_h2(Nonlinearity::power(1.0), 1e9, 1.0).verdict, Verdict::Pass);
    EXPECT_EQ(check_h2(Nonlinearity::saturating(), 1.0, 0.0).verdict, Verdict::NotApplicable);
}

TEST(H3, WitnessAndStrictness) {
    const double lambda1 = 6.2;
    const auto sat = Nonlinearity::saturating(2 * lambda1);
    const auto r = check_h3(sat, 2.0, 1.0 / lambda1, 1.0, 1.0);
    ASSERT_EQ(r.check.verdict, Verdict::Pass);
    // alpha ln(1+xi^2)/2 < lambda1 xi^2/2  <=>  2 ln(1+xi^2) < xi^2
    EXPECT_LT(2.0 * std::log1p(r.xi0 * r.xi0), r.xi0 * r.xi0);
    EXPECT_GT(r.margin, 0.0);
    // a grid oracle: no earlier grid point is a witness
    for (double xi : log_grid(-4, 6, 64)) {
        if (xi >= r.xi0) break;
        EXPECT_GE(sat.F(xi), h3_bound(xi, 2.0, 1.0 / lambda1, 1.0, 1.0));
    }
    // q = 2 ignores the L1 norm of h
    EXPECT_EQ(h3_bound(3.0, 2.0, 0.5, 2.0, 1.0), h3_bound(3.0, 2.0, 0.5, 2.0, 123.0));
    // equality is not a witness
    const double c = 0.7, sup = 1.3;
    const auto border = Nonlinearity::from([](double) { return 0.0; },
                                           [&](double x) { return h3_bound(x, 2.0, c, sup, 1.0); }, 1.0, "border");
    EXPECT_EQ(check_h3(border, 2.0, c, sup, 1.0).check.verdict, Verdict::Fail);
}

TEST(GLambda, SaturatingHasUniqueMinimumAtZero) {
    const auto nl = Nonlinearity::saturating();  // F = ln(1+t^2)/2
    const auto psi = AuxFunction::default_power(2.0);
    const auto gm = global_minima([&](double t) { return nl.F(t); }, [&](double t) { return nl.f(t); }, psi, 1.0);
    ASSERT_TRUE(gm.coercive);
    ASSERT_EQ(gm.points.size(), 1u);
    EXPECT_NEAR(gm.points[0], 0.0, 1e-12);
    // grid-scan oracle of g(t) = t^2 - ln(1+t^2)/2
    for (double t = -50.0; t <= 50.0; t += 0.01) EXPECT_GE(t * t - 0.5 * std::log1p(t * t), gm.value - 1e-15);
}

TEST(GLambda, LinearPsiWithQuadraticFIsNotCoercive) {
    const auto sq = Nonlinearity::from([](double t) { return 2 * t; }, [](double t) { return t * t; }, 2.0, "t^2");
    const auto a2 = analyze_g_lambda(sq, AuxFunction::expression("abs(t)", 1.0), 0.0, kInf, 8);
    EXPECT_EQ(a2.coercive, Verdict::Fail);
    EXPECT_EQ(a2.unique, Verdict::Fail);
}

TEST(GLambda, InfiniteUpperEndUsesEmptySet) {
    const auto nl = Nonlinearity::saturating(4.0).truncated();
    const auto psi = AuxFunction::default_power(2.0);
    const auto an = analyze_g_lambda(nl, psi, 0.0, kInf, 8);
    EXPECT_TRUE(an.minima_at_b.empty());
    EXPECT_EQ(an.alpha_val, an.inf_psi);
    EXPECT_EQ(an.alpha_val, 0.0);
    EXPECT_EQ(an.beta_val, kInf);
    EXPECT_EQ(an.coercive, Verdict::Pass);
    EXPECT_EQ(an.unique, Verdict::Pass);
    EXPECT_EQ(an.alpha_lt_beta(), Verdict::Pass);
}

TEST(GLambda, FiniteRangeLevels) {
    // g = lambda t^2 - t with minimizer 1/(2 lambda): psi there is 1/(4 lambda^2)
    const auto lin = Nonlinearity::from([](double) { return 1.0; }, [](double t) { return t; }, 1.0, "1");
    const auto psi = AuxFunction::default_power(2.0);
    const auto an = analyze_g_lambda(lin, psi, 0.25, 1.0, 8);
    EXPECT_NEAR(an.alpha_val, 0.25, 1e-7);  // psi(1/2) at lambda = b = 1
    EXPECT_NEAR(an.beta_val, 4.0, 1e-6);    // psi(2) at lambda = a = 1/4
}

TEST(LevelParameter, ClosedFormLinearF) {
    const auto lin = Nonlinearity::from([](double) { return 1.0; }, [](double t) { return t; }, 1.0, "1").truncated();
    const auto psi = AuxFunction::default_power(2.0);
    const auto an = analyze_g_lambda(lin, psi, 0.0, kInf, 8);
    for (auto [r, expect] : {std::pair{1.0, 0.5}, std::pair{4.0, 0.25}}) {
        const auto lp = find_level_parameter(lin, psi, r, an);
        EXPECT_NEAR(lp.lambda_r, expect, 1e-6 * expect);
        EXPECT_NEAR(lp.psi_value, r, 1e-8 * std::max(1.0, r));
        EXPECT_TRUE(lp.grid_minimal);
    }
    GLambdaAnalysis bounded = an;
    bounded.alpha_val = 2.0;
    EXPECT_THROW(find_level_parameter(lin, psi, 1.0, bounded), DomainError);
}

TEST(ConditionF, ZeroNonlinearityAndQuadraticSimplification) {
    const auto zero = Nonlinearity::from([](double) { return 0.0; }, [](double) { return 0.0; }, 1.0, "0");
    const auto psi = AuxFunction::default_power(2.0);
    LevelParameter lp;
    lp.r = 3.0;
    lp.xi_star = std::sqrt(3.0);
    const auto cf = check_condition_F(zero, psi, lp, 0.2, 1.0, 1.0);
    EXPECT_EQ(cf.check.verdict, Verdict::Pass);
    const double lambda1 = 5.0;
    EXPECT_NEAR(condition_F_rhs(3.0, 2.0, 1.0 / lambda1, 1.0, 1.0, 1.0), lambda1 * 3.0 / 2.0, 1e-12);
}

TEST(ConditionF, SaturatingSearchFindsPassingLevel) {
    const double lambda1 = 5.0, cq = 1.1 / lambda1;
    const auto nl = Nonlinearity::saturating(2 * lambda1).truncated();
    const auto psi = AuxFunction::default_power(2.0);
    const auto an = analyze_g_lambda(nl, psi, 0.0, kInf, 8);
    const auto rs = search_r(nl, psi, an, cq, 1.0, 1.0);
    ASSERT_TRUE(rs.condition.has_value());
    EXPECT_EQ(rs.condition->check.verdict, Verdict::Pass);
    EXPECT_GT(rs.condition->margin, 0.0);
    EXPECT_FALSE(rs.passing.empty());
    // closed form: xi* = sqrt(r), F = lambda1 ln(1+r); inequality log(1+r) < r / 2.2
    const double r = rs.condition->r;
    EXPECT_NEAR(rs.condition->lhs, lambda1 * std::log1p(r), 1e-6 * rs.condition->lhs);
    EXPECT_LT(std::log1p(r), r / 2.2);
}
