#pragma once

#include "fraclap/assembly.hpp"
#include "fraclap/core.hpp"
#include "fraclap/mesh.hpp"
#include "fraclap/parallel.hpp"
#include "fraclap/quadrature.hpp"
#include "fraclap/spectral.hpp"

#include <Eigen/Cholesky>

#include <random>

namespace fraclap {

/// Lower estimate of c_q = sup ||u||_q^q / ||u||^q over the discrete space.
struct EmbeddingEstimate {
    double q = 2.0;
    double c_q_lower = 0.0;
    Vector maximizer;          // A-normalized
    int restarts = 0;
    double two_star = kInf;    // 2n/(n-2s), +inf when n <= 2s
    std::vector<double> history;  // running supremum after each restart
};

/// Evaluates Q(u) = int |u_h|^q and its gradient with a fixed Gauss rule per element.
class LqFunctional {
public:
    LqFunctional(const Mesh& m, double q, int order = 10) : mesh_(&m), q_(q) {
        if (!(q >= 1.0)) throw ConfigError("q: must be at least 1");
        for (std::size_t e = 0; e < m.num_elements(); ++e) {
            if (!m.element_has_dof(e)) continue;
            detail::for_each_qp(m, e, order, [&](const std::array<double, 3>& lam, double w) {
                pts_.push_back({e, lam, w});
            });
        }
    }

    double value(const Vector& u) const {
        double acc = 0.0;
        for (const auto& p : pts_) acc += p.w * std::pow(std::abs(eval(p, u)), q_);
        return acc;
    }

    /// Gradient q int |u_h|^{q-2} u_h phi_i.
    Vector gradient(const Vector& u) const {
        Vector g = Vector::Zero(u.size());
        for (const auto& p : pts_) {
            const double v = eval(p, u);
            const double a = std::abs(v);
            const double d = a == 0.0 ? 0.0 : q_ * std::pow(a, q_ - 1.0) * (v > 0 ? 1.0 : -1.0);
            for (int k = 0; k <= mesh_->dim; ++k) {
                const int i = mesh_->dof_of_node[mesh_->elements[p.e][k]];
                if (i >= 0) g[i] += p.w * d * p.lam[k];
            }
        }
        return g;
    }

private:
    struct QP {
        std::size_t e;
        std::array<double, 3> lam;
        double w;
    };
    double eval(const QP& p, const Vector& u) const {
        double v = 0.0;
        for (int k = 0; k <= mesh_->dim; ++k) {
            const int i = mesh_->dof_of_node[mesh_->elements[p.e][k]];
            if (i >= 0) v += p.lam[k] * u[i];
        }
        return v;
    }
    const Mesh* mesh_;
    double q_;
    std::vector<QP> pts_;
};

/// ||u_h||_q^q with order-10 Gauss quadrature.
inline double lq_norm_power(const Mesh& m, const Vector& u, double q) { return LqFunctional(m, q).value(u); }

namespace detail {

struct AscentResult {
    Vector u;
    double value = 0.0;
};

// Projected gradient ascent of Q on {u^T A u = 1} in the A metric: the step
// direction is the tangential part of A^{-1} grad Q, the step length is
// Barzilai-Borwein with backtracking, and the iterate is renormalized.
inline AscentResult ascend(const LqFunctional& Q, const Matrix& A, const Eigen::LLT<Matrix>& llt, Vector u,
                           double q, double tol, int max_iters) {
    auto normalize = [&A](Vector& v) { v /= std::sqrt(v.dot(A * v)); };
    normalize(u);
    double f = Q.value(u);
    auto direction = [&](const Vector& v) {
        Vector g = llt.solve(Q.gradient(v));
        g -= v.dot(A * g) * v;
        return g;
    };
    Vector g = direction(u);
    double tau = 1.0 / (q * std::max(f, 1e-300));
    Vector u_prev, g_prev;
    for (int it = 0; it < max_iters; ++it) {
        if (it > 0) {
            const Vector s = u - u_prev, y = g - g_prev;
            const double sAs = s.dot(A * s), sAy = s.dot(A * y);
            if (sAy < 0.0 && std::isfinite(sAs / -sAy)) tau = sAs / -sAy;
        }
        Vector trial;
        double ft = -kInf;
        for (int bt = 0; bt < 60; ++bt) {
            trial = u + tau * g;
            normalize(trial);
            ft = Q.value(trial);
            if (ft >= f) break;
            tau *= 0.5;
        }
        if (!std::isfinite(ft)) throw NumericError("estimate_c_q: ascent produced a non-finite value");
        if (ft < f) break;  // no ascent possible at working precision
        u_prev = u;
        g_prev = g;
        u = trial;
        const double change = (ft - f) / std::max(std::abs(ft), 1e-300);
        f = ft;
        if (change < tol) break;
        g = direction(u);
    }
    return {u, f};
}

}  // namespace detail

/// Multi-start ascent for c_q. Start 0 is e1; the others are Gaussian random
/// vectors from per-restart streams seeded with seed + index, so the result
/// does not depend on how restarts are scheduled.
inline EmbeddingEstimate estimate_c_q(const StiffnessSystem& sys, const Mesh& mesh, double q, int restarts = 32,
                                      double tol = 1e-10, std::uint64_t seed = 0, double two_star = kInf) {
    if (!(q >= 1.0) || !(q < two_star))
        throw ConfigError("q: must lie in [1, 2*) with 2* = " + std::to_string(two_star));
    if (restarts < 1) throw ConfigError("cq_restarts: must be at least 1");
    const Eigen::LLT<Matrix> llt(sys.A);
    if (llt.info() != Eigen::Success) throw NumericError("estimate_c_q: stiffness matrix is not positive definite");
    const LqFunctional Q(mesh, q);
    const Vector e1 = first_eigenpair(sys.A, sys.M).e;
    const int n = static_cast<int>(sys.size());

    std::vector<detail::AscentResult> results(restarts);
    parallel_for(static_cast<std::size_t>(restarts), [&](std::size_t r) {
        Vector start(n);
        if (r == 0) {
            start = e1;
        } else {
            std::mt19937_64 gen(seed + r);
            std::normal_distribution<double> nd;
            for (int i = 0; i < n; ++i) start[i] = nd(gen);
        }
        results[r] = detail::ascend(Q, sys.A, llt, start, q, tol, 10000);
    });

    EmbeddingEstimate est;
    est.q = q;
    est.restarts = restarts;
    est.two_star = two_star;
    for (int r = 0; r < restarts; ++r) {
        if (results[r].value > est.c_q_lower) {
            est.c_q_lower = results[r].value;
            est.maximizer = results[r].u;
        }
        est.history.push_back(est.c_q_lower);
    }
    return est;
}

}  // namespace fraclap
