#pragma once

// Independent reference computations used by the unit and acceptance tests.

#include <Eigen/Dense>

#include <cmath>

namespace oracle {

// Autocorrelation of the unit hat on [-1, 1] (the centered cubic B-spline).
inline double hat_autocorr(double t) {
    t = std::abs(t);
    if (t <= 1.0) return 2.0 / 3.0 - t * t + 0.5 * t * t * t;
    if (t <= 2.0) return (2.0 - t) * (2.0 - t) * (2.0 - t) / 6.0;
    return 0.0;
}

// Stiffness matrix for K(z) = beta |z|^{-(1+2s)} on a uniform mesh of (a, b)
// through the translation form
//   A_ij = 2 int_0^inf K(z) G_ij(z) dz,
//   G_ij(z) = int_R (phi_i(x) - phi_i(x+z)) (phi_j(x) - phi_j(x+z)) dx,
// where G_ij is a cubic spline in z/h with integer breakpoints.
inline Eigen::MatrixXd stiffness_1d(double s, double beta, double a, double b, int cells) {
    const double h = (b - a) / cells;
    const int n = cells - 1;
    Eigen::MatrixXd A(n, n);
    // nodes for the smooth segments
    const int ng = 40;
    Eigen::VectorXd gx(ng), gw(ng);
    for (int i = 0; i < ng; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (ng + 0.5)), dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= ng; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = ng * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        gx[i] = 0.5 * (z + 1.0);
        gw[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const int k = std::abs(i - j);
            // G in units of h, as a function of tau = z / h
            auto G = [k](double tau) {
                return 2.0 * hat_autocorr(k) - hat_autocorr(tau - k) - hat_autocorr(tau + k);
            };
            // integrand K(z) G dz with z = h tau: beta h^{-2s} tau^{-1-2s} G(tau) dtau (times h from G)
            const double scale = beta * std::pow(h, 1.0 - 2.0 * s);
            double acc = 0.0;
            // first segment [0,1]: G is a cubic with vanishing constant and linear terms
            {
                const double g1 = G(1.0), gh = G(0.5);
                // c2 tau^2 + c3 tau^3 through (0.5, gh), (1, g1)
                const double c3 = (g1 - 4.0 * gh) / (1.0 - 0.5);
                const double c2 = g1 - c3;
                acc += c2 / (2.0 - 2.0 * s) + c3 / (3.0 - 2.0 * s);
            }
            const int last = k + 2;
            for (int m = 1; m < last; ++m) {
                for (int q = 0; q < ng; ++q) {
                    const double tau = m + gx[q];
                    acc += gw[q] * std::pow(tau, -1.0 - 2.0 * s) * G(tau);
                }
            }
            // beyond tau = k + 2 the shifted hats no longer overlap
            acc += 2.0 * hat_autocorr(k) * std::pow(static_cast<double>(last), -2.0 * s) / (2.0 * s);
            A(i, j) = 2.0 * scale * acc;
        }
    }
    return A;
}

}  // namespace oracle

#include <boost/math/quadrature/gauss.hpp>

#include <random>

namespace oracle {

// int_0^1 |u_h|^q and its gradient for P1 on a uniform mesh of (0, 1) with
// zero boundary values, using Boost's 10-point Gauss rule on each cell.
struct Lq1D {
    int cells;
    double q;

    template <typename Fn>
    void visit(const Eigen::VectorXd& u, Fn&& fn) const {
        using G = boost::math::quadrature::gauss<double, 10>;
        const double h = 1.0 / cells;
        auto coef = [&](int node) { return (node <= 0 || node >= cells) ? 0.0 : u[node - 1]; };
        for (int c = 0; c < cells; ++c) {
            const double ul = coef(c), ur = coef(c + 1);
            auto point = [&](double xi, double w) {  // xi in [-1, 1]
                const double t = 0.5 * (xi + 1.0);
                fn(c, t, (1 - t) * ul + t * ur, 0.5 * w * h);
            };
            for (std::size_t k = 0; k < G::abscissa().size(); ++k) {
                const double x = G::abscissa()[k], w = G::weights()[k];
                point(x, w);
                if (x != 0.0) point(-x, w);
            }
        }
    }

    double value(const Eigen::VectorXd& u) const {
        double acc = 0.0;
        visit(u, [&](int, double, double v, double w) { acc += w * std::pow(std::abs(v), q); });
        return acc;
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& u) const {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(u.size());
        visit(u, [&](int c, double t, double v, double w) {
            const double d = q * std::pow(std::abs(v), q - 1.0) * (v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0));
            if (c >= 1) g[c - 1] += w * d * (1 - t);
            if (c + 1 <= cells - 1) g[c] += w * d * t;
        });
        return g;
    }
};

// Nonlinear power iteration u <- A^{-1} grad Q(u), normalized in the A norm,
// from many random starts; returns the best Q on the A-sphere.
inline double embedding_power_iteration(const Eigen::MatrixXd& A, const Lq1D& Q, int starts, unsigned seed) {
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    double best = 0.0;
    for (int s = 0; s < starts; ++s) {
        Eigen::VectorXd u(A.rows());
        for (int i = 0; i < u.size(); ++i) u[i] = ud(gen);
        u /= std::sqrt(u.dot(A * u));
        double prev = 0.0;
        for (int it = 0; it < 5000; ++it) {
            u = llt.solve(Q.gradient(u));
            u /= std::sqrt(u.dot(A * u));
            const double v = Q.value(u);
            if (std::abs(v - prev) <= 1e-13 * v) break;
            prev = v;
        }
        best = std::max(best, Q.value(u));
    }
    return best;
}

}  // namespace oracle
