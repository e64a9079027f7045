#include "fraclap/hypotheses.hpp"
#include "fraclap/kernel.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace fraclap;

namespace {

Domain interval(double a, double b) {
    Domain d;
    d.dim = 1;
    d.x0 = a;
    d.x1 = b;
    return d;
}

Domain rectangle(double x0, double x1, double y0, double y1) {
    Domain d;
    d.dim = 2;
    d.x0 = x0;
    d.x1 = x1;
    d.y0 = y0;
    d.y1 = y1;
    return d;
}

// Distance from x to the rectangle boundary along direction theta.
double ray_exit(const Domain& d, const Point& x, double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    double t = kInf;
    if (c > 0) t = std::min(t, (d.x1 - x[0]) / c);
    if (c < 0) t = std::min(t, (d.x0 - x[0]) / c);
    if (s > 0) t = std::min(t, (d.y1 - x[1]) / s);
    if (s < 0) t = std::min(t, (d.y0 - x[1]) / s);
    return t;
}

// int over the complement of |x-y|^{-(2+2s)} dy = int_0^{2 pi} rho(theta)^{-2s} / (2s) d theta,
// integrated piecewise between the corner directions.
double polar_oracle(const Domain& d, const Point& x, double s) {
    std::vector<double> cuts{std::atan2(d.y1 - x[1], d.x1 - x[0]), std::atan2(d.y1 - x[1], d.x0 - x[0]),
                             std::atan2(d.y0 - x[1], d.x0 - x[0]), std::atan2(d.y0 - x[1], d.x1 - x[0])};
    for (double& c : cuts)
        if (c < 0) c += 2 * kPi;
    std::sort(cuts.begin(), cuts.end());
    cuts.push_back(cuts.front() + 2 * kPi);
    boost::math::quadrature::tanh_sinh<double> ts;
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
        total += ts.integrate([&](double th) { return std::pow(ray_exit(d, x, th), -2 * s) / (2 * s); }, cuts[k],
                              cuts[k + 1]);
    return total;
}

}  // namespace

TEST(Kernel, EvaluatesModelPowerLaw) {
    EXPECT_DOUBLE_EQ(Kernel::fractional(1, 0.5).evaluate(Point(2.0)), 0.25);
    const Kernel k = Kernel::fractional(1, 0.5);
    EXPECT_EQ(k.evaluate(Point(-0.3)), k.evaluate(Point(0.3)));
    EXPECT_DOUBLE_EQ(Kernel::fractional(2, 0.4).evaluate(Point(1.0, 0.0)), 1.0);
    EXPECT_THROW(k.evaluate(Point(0.0)), DomainError);
}

TEST(Kernel, EvenOnRandomSamples) {
    std::mt19937 gen(3);
    std::uniform_real_distribution<double> u(-5, 5);
    const Kernel k = Kernel::fractional(2, 0.3);
    for (int i = 0; i < 200; ++i) {
        const Point x(u(gen), u(gen));
        EXPECT_EQ(k.evaluate(x), k.evaluate(Point(-x[0], -x[1])));
    }
}

TEST(Kernel, RejectsBadParameters) {
    EXPECT_THROW(Kernel::fractional(3, 0.5), ConfigError);
    EXPECT_THROW(Kernel::fractional(1, 1.0), ConfigError);
    EXPECT_THROW(Kernel::fractional(1, 0.5, 0.0), ConfigError);
    EXPECT_THROW(Kernel::tabulated(1, 0.5, 1.0, {1.0, 0.5}, {1.0, 1.0}), ConfigError);
    EXPECT_THROW(Kernel::tabulated(1, 0.5, 1.0, {1.0}, {1.0}), ConfigError);
}

TEST(Kernel, TabulatedInterpolatesLogLinearly) {
    std::vector<double> r, v;
    for (int j = -6; j <= 6; ++j) {
        r.push_back(std::pow(10.0, j));
        v.push_back(std::pow(10.0, -2.0 * j));
    }
    const Kernel k = Kernel::tabulated(1, 0.5, 1.0, r, v);
    for (double x : {2e-6, 0.37, 3.0, 4e5}) EXPECT_NEAR(k.radial(x), std::pow(x, -2.0), 1e-12 * std::pow(x, -2.0));
    EXPECT_THROW(k.radial(1e-7), DomainError);
    EXPECT_THROW(k.radial(2e6), DomainError);
    // integrals continue the end segments as power laws
    const Kernel exact = Kernel::fractional(1, 0.5);
    EXPECT_NEAR(k.moment(2, 0.5), exact.moment(2, 0.5), 1e-12);
    EXPECT_NEAR(k.tail(0, 0.25), exact.tail(0, 0.25), 1e-12);
}

TEST(Kernel, ReadsRadialTable) {
    const auto path = std::filesystem::temp_directory_path() / "fraclap_kernel_table.csv";
    std::ofstream(path) << "radius,value\n0.1,100\n1,1\n10,0.01\n";
    const auto [r, v] = read_radial_table(path.string());
    ASSERT_EQ(r.size(), 3u);
    EXPECT_EQ(r[2], 10.0);
    EXPECT_EQ(v[0], 100.0);
    std::ofstream(path) << "0.1,100\n1\n";
    EXPECT_THROW(read_radial_table(path.string()), ConfigError);
    EXPECT_THROW(read_radial_table("/nonexistent/table.csv"), ConfigError);
}

TEST(Conditions, ModelKernelPasses) {
    for (int n : {1, 2}) {
        const auto c = validate_conditions(Kernel::fractional(n, 0.5), 400);
        EXPECT_TRUE(c.all_pass()) << c.k1_detail << c.k2_detail << c.k3_detail;
    }
    EXPECT_THROW(validate_conditions(Kernel::fractional(1, 0.5), 99), ConfigError);
}

TEST(Conditions, TooSingularProfileFailsIntegrability) {
    // r^{-(n+2s+1)}: int_0^1 r^2 r^{-(n+2s+1)} r^{n-1} dr diverges for 2s + 1 >= 2
    const int n = 1;
    const double s = 0.6, p = n + 2 * s + 1;
    std::vector<double> r, v;
    for (double x : log_grid(-6, 6, 4)) {
        r.push_back(x);
        v.push_back(std::pow(x, -p));
    }
    const auto c = validate_conditions(Kernel::tabulated(n, s, 1.0, r, v), 400);
    EXPECT_EQ(c.k1, Verdict::Fail);
}

TEST(Conditions, HalfProfileFailsLowerBound) {
    const int n = 1;
    const double s = 0.5;
    std::vector<double> r, v;
    for (double x : log_grid(-6, 6, 4)) {
        r.push_back(x);
        v.push_back(0.5 * std::pow(x, -(n + 2 * s)));
    }
    const auto c = validate_conditions(Kernel::tabulated(n, s, 1.0, r, v), 400);
    EXPECT_EQ(c.k2, Verdict::Fail);
    EXPECT_EQ(c.k3, Verdict::Pass);
}

TEST(ExteriorWeight, IntervalClosedForm) {
    const Kernel k = Kernel::fractional(1, 0.5);
    const Domain d = interval(0.0, 1.0);
    EXPECT_NEAR(exterior_weight(k, d, Point(0.5)), 4.0, 1e-14);
    EXPECT_NEAR(exterior_weight(k, d, Point(0.25)), 16.0 / 3.0, 1e-13);
    EXPECT_NEAR(exterior_weight(k, d, Point(0.3)), exterior_weight(k, d, Point(0.7)), 1e-13);
    EXPECT_THROW(exterior_weight(k, d, Point(0.0)), DomainError);
    EXPECT_THROW(exterior_weight(k, d, Point(1.5)), DomainError);
}

TEST(ExteriorWeight, GrowsTowardBoundary) {
    const Kernel k = Kernel::fractional(2, 0.3);
    const Domain d = rectangle(0, 1, 0, 2);
    double prev = 0.0;
    for (double t : {0.4, 0.2, 0.1, 0.01, 1e-4, 1e-8}) {
        const double w = exterior_weight(k, d, Point(t, 0.7));
        EXPECT_GT(w, prev);
        prev = w;
    }
}

TEST(ExteriorWeight, GenericRouteMatchesClosedForm) {
    for (double s : {0.25, 0.5, 0.75}) {
        const Kernel k1 = Kernel::fractional(1, s);
        const Domain d1 = interval(-1.0, 2.0);
        for (double x : {-0.9, 0.1, 1.99}) {
            const double a = exterior_weight(k1, d1, Point(x)), b = exterior_weight(k1, d1, Point(x), Route::Generic);
            EXPECT_NEAR(b, a, 1e-8 * a);
        }
        const Kernel k2 = Kernel::fractional(2, s);
        const Domain d2 = rectangle(0, 1, 0, 0.5);
        for (const Point& x : {Point(0.5, 0.25), Point(0.05, 0.4), Point(0.9, 0.01)}) {
            const double a = exterior_weight(k2, d2, x), b = exterior_weight(k2, d2, x, Route::Generic);
            EXPECT_NEAR(b, a, 1e-8 * a);
        }
    }
}

TEST(ExteriorWeight, RectangleMatchesPolarOracle) {
    const Domain d = rectangle(-0.5, 1.0, 0.0, 1.0);
    for (double s : {0.2, 0.5, 0.8}) {
        const Kernel k = Kernel::fractional(2, s);
        for (const Point& x : {Point(0.0, 0.5), Point(0.9, 0.95), Point(-0.4, 0.2)}) {
            const double ref = polar_oracle(d, x, s);
            EXPECT_NEAR(exterior_weight(k, d, x), ref, 1e-9 * ref) << s;
        }
    }
}
