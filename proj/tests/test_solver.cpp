#include "fraclap/embedding.hpp"
#include "fraclap/solver.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace fraclap;

namespace {

struct Interval {
    Mesh mesh;
    StiffnessSystem sys;
    HField h;
    EigenPair ep;

    Interval(int cells, double s, HField field = HField::constant(1.0))
        : mesh(build_interval_mesh(0.0, 1.0, cells)),
          sys(assemble_stiffness(mesh, Kernel::fractional(1, s))),
          h(std::move(field)),
          ep(first_eigenpair(sys.A, sys.M)) {}
};

Vector random_vector(int n, unsigned seed, double scale = 1.0) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> nd;
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = scale * nd(gen);
    return v;
}

}  // namespace

TEST(Energy, ZeroAndQuadraticCases) {
    Interval st(16, 0.5);
    const Vector u = random_vector(static_cast<int>(st.sys.size()), 1);
    const auto sat = Nonlinearity::saturating(3.0);
    EXPECT_EQ(energy(Problem{st.sys, st.mesh, st.h, sat}, Vector::Zero(st.sys.size())), 0.0);

    const auto zero = Nonlinearity::power(2.0, 0.0);
    EXPECT_NEAR(energy(Problem{st.sys, st.mesh, st.h, zero}, u), 0.5 * u.dot(st.sys.A * u), 1e-14 * u.dot(st.sys.A * u));

    const auto lin = Nonlinearity::power(2.0);
    const double expect = 0.5 * u.dot(st.sys.A * u) - 0.5 * u.dot(st.sys.M * u);
    EXPECT_NEAR(energy(Problem{st.sys, st.mesh, st.h, lin}, u), expect, 1e-12 * u.dot(st.sys.A * u));
}

TEST(Gradient, EigenvectorIdentity) {
    Interval st(16, 0.5);
    const auto lin = Nonlinearity::power(2.0);
    const Problem p{st.sys, st.mesh, st.h, lin};
    const Vector g = gradient(p, st.ep.e);
    const Vector expect = (st.ep.lambda - 1.0) * (st.sys.M * st.ep.e);
    EXPECT_LE((g - expect).lpNorm<Eigen::Infinity>(), 1e-9);
    EXPECT_EQ(gradient(p, Vector::Zero(st.sys.size())).lpNorm<Eigen::Infinity>(), 0.0);
}

class GradientFiniteDifference : public ::testing::TestWithParam<int> {};

TEST_P(GradientFiniteDifference, MatchesCentralDifferences) {
    Interval st(12, 0.4, HField::piecewise(std::vector<double>(12, 1.0)));
    const Nonlinearity nl = GetParam() == 0 ? Nonlinearity::saturating(5.0) : Nonlinearity::power(2.0, 3.0);
    const Problem p{st.sys, st.mesh, st.h, nl};
    const int n = static_cast<int>(st.sys.size());
    for (unsigned trial = 0; trial < 20; ++trial) {
        const Vector u = random_vector(n, 100 + trial, 2.0);
        const Vector g = gradient(p, u);
        const double scale = std::max(1.0, u.lpNorm<Eigen::Infinity>());
        const double step = 1e-6 * scale;
        for (int i = 0; i < n; ++i) {
            Vector up = u, um = u;
            up[i] += step;
            um[i] -= step;
            const double fd = (energy(p, up) - energy(p, um)) / (2.0 * step);
            EXPECT_NEAR(g[i], fd, 1e-6 * std::max(1.0, std::abs(fd))) << "trial " << trial << " component " << i;
        }
    }
}

INSTANTIATE_TEST_SUITE_P(Nonlinearities, GradientFiniteDifference, ::testing::Values(0, 1));

TEST(Ball, LevelRoundTrip) {
    for (double r : {1e-3, 0.7, 42.0}) {
        const auto b = BallConstraint::from_level(r, 3.0, 0.37, 1.5, 2.0, 0.8);
        EXPECT_NEAR(BallConstraint::level_of(b.sigma, 3.0, 0.37, 1.5, 2.0, 0.8), r, 1e-12 * r);
    }
    EXPECT_THROW(BallConstraint::from_level(0.0, 2.0, 1.0, 1.0, 1.0, 1.0), DomainError);
}

TEST(Solve, ZeroNonlinearityGivesZero) {
    Interval st(16, 0.5);
    const auto zero = Nonlinearity::power(2.0, 0.0);
    const Problem p{st.sys, st.mesh, st.h, zero};
    const auto rep = solve_in_ball(p, {1.0, 1.0}, st.ep.e, std::nullopt);
    EXPECT_EQ(rep.u.lpNorm<Eigen::Infinity>(), 0.0);
    EXPECT_EQ(rep.energy, 0.0);
    EXPECT_EQ(rep.nontrivial, Verdict::NotApplicable);
    EXPECT_EQ(rep.residual.residual_inf, 0.0);
    EXPECT_FALSE(nontriviality_certificate(p, st.ep.e, st.ep.lambda, 1.0).found);
}

TEST(Solve, SubcriticalLinearProblemHasOnlyZero) {
    Interval st(16, 0.5);
    // A - c M positive definite for c < lambda1
    const auto lin = Nonlinearity::power(2.0, 0.5 * st.ep.lambda);
    const Problem p{st.sys, st.mesh, st.h, lin};
    const Vector direct = (st.sys.A - 0.5 * st.ep.lambda * st.sys.M).llt().solve(Vector::Zero(st.sys.size()));
    const auto rep = solve_in_ball(p, {10.0, 1.0}, st.ep.e, std::nullopt);
    EXPECT_LE((rep.u - direct).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_EQ(rep.residual.verdict, Verdict::Pass);
    EXPECT_EQ(rep.nontrivial, Verdict::Fail);
}

TEST(Solve, SaturatingExampleOnUnitInterval) {
    Interval st(64, 0.5);
    const double lambda1 = st.ep.lambda;
    const auto nl = Nonlinearity::saturating(2.0 * lambda1).truncated();
    const Problem p{st.sys, st.mesh, st.h, nl};

    const auto w = nontriviality_certificate(p, st.ep.e, lambda1, 1.0);
    ASSERT_TRUE(w.found);
    EXPECT_LT(w.energy_first, 0.0);
    EXPECT_LE(w.energy, w.energy_first);
    EXPECT_LE(w.eta, w.eta_max);

    const double c_q = 1.10 / lambda1;
    const auto h3 = check_h3(nl, 2.0, c_q, 1.0, 1.0);
    ASSERT_EQ(h3.check.verdict, Verdict::Pass);
    const auto ball = BallConstraint::from_level(h3.xi0 * h3.xi0, 2.0, c_q, 1.0, 1.0, 1.0);
    const auto rep = solve_in_ball(p, ball, st.ep.e, w);

    EXPECT_EQ(rep.nonnegative, Verdict::Pass);
    EXPECT_GE(rep.min_nodal, -1e-6 * rep.max_nodal);
    EXPECT_LT(rep.energy, 0.0);
    EXPECT_LE(rep.energy, w.energy);
    EXPECT_EQ(rep.nontrivial, Verdict::Pass);
    EXPECT_EQ(rep.bound_F2, Verdict::Pass);
    EXPECT_LT(rep.x0_norm_sq, ball.sigma);
    EXPECT_TRUE(rep.residual.interior);
    EXPECT_LE(rep.residual.residual_inf, 1e-8 * rep.residual.load_inf);
    EXPECT_LT(rep.half_threshold, 0.5);

    const double recomputed = 0.5 * rep.u.dot(st.sys.A * rep.u) -
                              integrate_field(st.mesh, st.h, [&](double t) { return nl.F(t); }, rep.u);
    EXPECT_NEAR(rep.energy, recomputed, 1e-10 * std::max(1.0, std::abs(recomputed)));
}

TEST(Solve, DescentIsMonotoneAndDeterministic) {
    Interval st(24, 0.3);
    const auto nl = Nonlinearity::saturating(3.0 * st.ep.lambda).truncated();
    const Problem p{st.sys, st.mesh, st.h, nl};
    SolverOptions opt;
    opt.starts = 5;
    opt.seed = 9;
    const auto a = solve_in_ball(p, {50.0, 1.0}, st.ep.e, std::nullopt, opt);
    const auto b = solve_in_ball(p, {50.0, 1.0}, st.ep.e, std::nullopt, opt);
    EXPECT_EQ(a.u, b.u);
    EXPECT_EQ(a.best_start, b.best_start);
    for (double J : a.start_energies) EXPECT_GE(J, a.energy - 1e-12);
}

TEST(Solve, RejectsBadArguments) {
    Interval st(8, 0.5);
    const auto nl = Nonlinearity::saturating();
    const Problem p{st.sys, st.mesh, st.h, nl};
    EXPECT_THROW(solve_in_ball(p, {0.0, 1.0}, st.ep.e, std::nullopt), DomainError);
    SolverOptions opt;
    opt.starts = 0;
    EXPECT_THROW(solve_in_ball(p, {1.0, 1.0}, st.ep.e, std::nullopt, opt), ConfigError);
}
