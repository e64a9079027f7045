#pragma once

#include "fraclap/assembly.hpp"
#include "fraclap/core.hpp"
#include "fraclap/hypotheses.hpp"
#include "fraclap/mesh.hpp"
#include "fraclap/parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <random>

namespace fraclap {

/// The closed ball {u^T A u <= sigma} with sigma = (r ||h||_1 / (c gamma_psi esssup h))^{2/q}.
struct BallConstraint {
    double sigma = 0.0;
    double r = 0.0;

    static BallConstraint from_level(double r, double q, double c_q, double gamma_psi, double h_esssup, double h_l1) {
        if (!(r > 0.0)) throw DomainError("BallConstraint: r must be positive");
        return {std::pow(r * h_l1 / (c_q * gamma_psi * h_esssup), 2.0 / q), r};
    }

    /// Inverse of from_level.
    static double level_of(double sigma, double q, double c_q, double gamma_psi, double h_esssup, double h_l1) {
        return std::pow(sigma, q / 2.0) * c_q * gamma_psi * h_esssup / h_l1;
    }
};

/// Everything a solve needs besides the start points.
struct Problem {
    const StiffnessSystem& sys;
    const Mesh& mesh;
    const HField& h;
    const Nonlinearity& nl;
};

/// J(u) = 1/2 u^T A u - int h F(u_h).
inline double energy(const Problem& p, const Vector& u) {
    const double load = integrate_field(p.mesh, p.h, [&](double t) { return p.nl.F(t); }, u, p.sys.quadrature_order);
    const double J = 0.5 * p.sys.norm_sq(u) - load;
    if (!std::isfinite(J)) throw NumericError("energy: non-finite value");
    return J;
}

/// b(u)_i = int h f(u_h) phi_i.
inline Vector load_vector(const Problem& p, const Vector& u) {
    return assemble_load(p.mesh, p.h, [&](double t) { return p.nl.f(t); }, u, p.sys.quadrature_order);
}

/// A u - b(u).
inline Vector gradient(const Problem& p, const Vector& u) {
    Vector g = p.sys.A * u - load_vector(p, u);
    if (!g.allFinite()) throw NumericError("gradient: non-finite value");
    return g;
}

/// Weak-form residual of a computed solution.
struct ResidualReport {
    double residual_inf = 0.0;   // ||A u - b(u)||_inf
    double projected_inf = 0.0;  // with the component along A u removed (sphere case)
    double load_inf = 0.0;       // ||b(u)||_inf
    bool interior = true;
    Verdict verdict = Verdict::Fail;
};

inline ResidualReport verify_weak_solution(const Problem& p, const Vector& u, double sigma, double tol) {
    ResidualReport r;
    const Vector b = load_vector(p, u);
    const Vector Au = p.sys.A * u;
    const Vector g = Au - b;
    r.residual_inf = g.lpNorm<Eigen::Infinity>();
    r.load_inf = b.lpNorm<Eigen::Infinity>();
    r.interior = u.dot(Au) < sigma * (1.0 - 1e-12);
    if (r.interior) {
        r.projected_inf = r.residual_inf;
    } else {
        const double n2 = Au.squaredNorm();
        r.projected_inf = (n2 > 0.0 ? Vector(g - (Au.dot(g) / n2) * Au) : g).lpNorm<Eigen::Infinity>();
    }
    r.verdict = verdict_of((r.interior ? r.residual_inf : r.projected_inf) <= tol);
    return r;
}

/// theta_eta = eta e1 with negative energy, if one is found.
struct NontrivialityWitness {
    bool found = false;
    double delta_hat = kNaN;  // end of the initial range where F(xi) > lambda1 xi^2 / (2 essinf h)
    double eta_max = kNaN;
    double eta_first = kNaN;  // best grid point
    double energy_first = kNaN;
    double eta = kNaN;        // after local refinement
    double energy = kNaN;
};

/// Scans J(eta e1) over eta in (0, eta_max], eta_max = delta_hat / max e1.
inline NontrivialityWitness nontriviality_certificate(const Problem& p, const Vector& e1, double lambda1,
                                                      double h_essinf) {
    NontrivialityWitness w;
    const double emax = e1.maxCoeff();
    if (!(emax > 0.0)) throw DomainError("nontriviality_certificate: e1 must have a positive entry");
    const double slope = h_essinf > 0.0 ? lambda1 / (2.0 * h_essinf) : kInf;
    double delta = kNaN;
    for (double xi : log_grid(-8, 6, 64)) {
        if (p.nl.F(xi) > slope * xi * xi)
            delta = xi;
        else
            break;
    }
    w.delta_hat = delta;
    w.eta_max = std::isfinite(delta) ? delta / emax : 1e3 / emax;
    const auto grid = log_grid(-8, 0, 16);
    double best_J = 0.0;
    std::size_t best = grid.size();
    std::vector<double> etas(grid.size()), Js(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        etas[k] = w.eta_max * grid[k];
        Js[k] = energy(p, etas[k] * e1);
        if (Js[k] < best_J) {
            best_J = Js[k];
            best = k;
        }
    }
    if (best == grid.size()) return w;
    w.found = true;
    w.eta_first = etas[best];
    w.energy_first = Js[best];
    // golden refinement on the bracket around the best grid point
    double lo = best > 0 ? etas[best - 1] : 0.5 * etas[best];
    double hi = best + 1 < etas.size() ? etas[best + 1] : etas[best];
    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    auto J = [&](double eta) { return energy(p, eta * e1); };
    double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo), f1 = J(x1), f2 = J(x2);
    for (int it = 0; it < 60; ++it) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = J(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = J(x2);
        }
    }
    const double xr = f1 <= f2 ? x1 : x2, fr = std::min(f1, f2);
    if (fr <= w.energy_first) {
        w.eta = xr;
        w.energy = fr;
    } else {
        w.eta = w.eta_first;
        w.energy = w.energy_first;
    }
    return w;
}

/// Parameters of the ball-constrained minimization.
struct SolverOptions {
    int max_iters = 100000;
    double grad_tol = 1e-9;
    int starts = 8;
    std::uint64_t seed = 0;
    bool newton_polish = true;
};

/// Result of solve_in_ball with its certificates.
struct SolveReport {
    Vector u;
    double energy = 0.0;
    double x0_norm_sq = 0.0;
    double sigma = 0.0;
    double min_nodal = 0.0;
    double max_nodal = 0.0;
    Verdict nonnegative = Verdict::Fail;
    Verdict nontrivial = Verdict::Fail;
    Verdict bound_F2 = Verdict::Fail;
    ResidualReport residual;
    int iterations = 0;
    int best_start = -1;
    double half_threshold = 0.0;  // max over accepted iterates of int h F(u) / sigma
    std::vector<double> start_energies;
};

namespace detail {

struct Descent {
    Vector u;
    double J = kInf;
    int iterations = 0;
    double half_threshold = 0.0;
};

inline void project_ball(Vector& u, const Matrix& A, double sigma) {
    const double n2 = u.dot(A * u);
    if (n2 > sigma) u *= std::sqrt(sigma / n2);
}

// A-preconditioned projected gradient with Barzilai-Borwein steps and Armijo backtracking.
inline Descent descend(const Problem& p, const Eigen::LLT<Matrix>& llt, Vector u, double sigma,
                       const SolverOptions& opt) {
    const Matrix& A = p.sys.A;
    project_ball(u, A, sigma);
    Descent out;
    double J = energy(p, u);
    out.half_threshold = std::max(0.0, (0.5 * u.dot(A * u) - J) / sigma);
    Vector b = load_vector(p, u);
    Vector g = A * u - b;
    Vector d = llt.solve(g);
    Vector u_prev, d_prev;
    double tau = 1.0;
    int it = 0, stalled = 0;
    for (; it < opt.max_iters; ++it) {
        const Vector Au = A * u;
        const bool on_sphere = u.dot(Au) >= sigma * (1.0 - 1e-12);
        Vector pg = g;
        if (on_sphere && u.dot(g) < 0.0) pg -= (Au.dot(g) / Au.squaredNorm()) * Au;
        if (pg.lpNorm<Eigen::Infinity>() <= opt.grad_tol * (1.0 + b.lpNorm<Eigen::Infinity>())) break;
        if (it > 0) {
            const Vector s = u - u_prev, y = d - d_prev;
            const double sAy = s.dot(A * y);
            if (sAy > 0.0) tau = std::clamp(s.dot(A * s) / sAy, 1e-3, 1e3);
        }
        bool accepted = false;
        Vector trial;
        double Jt = 0.0;
        const double noise = 1e-14 * std::max(1.0, std::abs(J));
        for (int bt = 0; bt < 60; ++bt) {
            trial = u - tau * d;
            project_ball(trial, A, sigma);
            Jt = energy(p, trial);
            const double predicted = g.dot(trial - u);
            if (Jt <= J + 1e-4 * predicted) {
                accepted = true;
                break;
            }
            // decrease below the resolution of J: judge the step by the gradient
            if (Jt <= J && -predicted < noise &&
                (A * trial - load_vector(p, trial)).lpNorm<Eigen::Infinity>() < pg.lpNorm<Eigen::Infinity>()) {
                accepted = true;
                break;
            }
            tau *= 0.5;
        }
        if (!accepted || Jt > J) break;
        stalled = Jt < J ? 0 : stalled + 1;
        u_prev = u;
        d_prev = d;
        u = trial;
        J = Jt;
        out.half_threshold = std::max(out.half_threshold, (0.5 * u.dot(A * u) - J) / sigma);
        if (stalled > 100) break;
        b = load_vector(p, u);
        g = A * u - b;
        d = llt.solve(g);
    }
    out.u = u;
    out.J = J;
    out.iterations = it;
    return out;
}

// Newton steps on A u - b(u) = 0 inside the ball; a step is kept only when
// it lowers the residual and stays strictly interior without raising J.
inline void newton_polish(const Problem& p, Vector& u, double& J, double sigma) {
    const Mesh& m = p.mesh;
    auto fprime = [&](double t) {
        const double h = 1e-6 * std::max(1.0, std::abs(t));
        return (p.nl.f(t + h) - p.nl.f(t - h)) / (2.0 * h);
    };
    for (int it = 0; it < 8; ++it) {
        const Vector G = gradient(p, u);
        const double res = G.lpNorm<Eigen::Infinity>();
        if (res == 0.0) return;
        Matrix Jac = p.sys.A;
        for (std::size_t e = 0; e < m.num_elements(); ++e) {
            if (!m.element_has_dof(e)) continue;
            const double he = p.h.on_element(e);
            const auto vals = m.local_values(e, u);
            detail::for_each_qp(m, e, p.sys.quadrature_order, [&](const std::array<double, 3>& lam, double w) {
                double uh = 0.0;
                for (int k = 0; k <= m.dim; ++k) uh += lam[k] * vals[k];
                const double c = w * he * fprime(uh);
                for (int a = 0; a <= m.dim; ++a) {
                    const int i = m.dof_of_node[m.elements[e][a]];
                    if (i < 0) continue;
                    for (int bb = 0; bb <= m.dim; ++bb) {
                        const int j = m.dof_of_node[m.elements[e][bb]];
                        if (j >= 0) Jac(i, j) -= c * lam[a] * lam[bb];
                    }
                }
            });
        }
        const Vector step = Jac.partialPivLu().solve(-G);
        if (!step.allFinite()) return;
        const Vector cand = u + step;
        if (!(cand.dot(p.sys.A * cand) < sigma * (1.0 - 1e-12))) return;
        const double Jc = energy(p, cand);
        const double rc = gradient(p, cand).lpNorm<Eigen::Infinity>();
        if (!(rc < res) || Jc > J + 1e-12 * std::max(1.0, std::abs(J))) return;
        u = cand;
        J = Jc;
    }
}

}  // namespace detail

/// True when f vanishes on a symmetric log grid and at 0.
inline bool is_zero_nonlinearity(const Nonlinearity& nl) {
    if (nl.f(0.0) != 0.0) return false;
    for (double t : log_grid(-8, 8, 8))
        if (nl.f(t) != 0.0 || nl.f(-t) != 0.0) return false;
    return true;
}

/// Minimizes J over the ball from several starts and certifies the best point.
///
/// Start order: the theta_eta witness (when given), eta e1 at three radii,
/// two small perturbations of 0, then random points in the ball. Starts are
/// independent; the lowest energy wins, ties going to the lowest start index.
inline SolveReport solve_in_ball(const Problem& p, const BallConstraint& ball, const Vector& e1,
                                 const std::optional<NontrivialityWitness>& witness, const SolverOptions& opt = {}) {
    if (!(ball.sigma > 0.0)) throw DomainError("solve_in_ball: sigma must be positive");
    if (opt.starts < 1) throw ConfigError("solver.starts: must be at least 1");
    const Matrix& A = p.sys.A;
    const Eigen::LLT<Matrix> llt(A);
    if (llt.info() != Eigen::Success) throw NumericError("solve_in_ball: stiffness matrix is not positive definite");
    const int n = static_cast<int>(p.sys.size());
    const double e1_norm2 = e1.dot(A * e1);

    auto random_dir = [&](std::uint64_t stream) {
        std::mt19937_64 gen(opt.seed * 1000003ull + stream);
        std::normal_distribution<double> nd;
        Vector v(n);
        for (int i = 0; i < n; ++i) v[i] = nd(gen);
        return Vector(v / std::sqrt(v.dot(A * v)));
    };
    std::vector<Vector> starts;
    if (witness && witness->found) starts.push_back(witness->eta * e1);
    for (double frac : {0.01, 0.25, 0.81}) {
        if (static_cast<int>(starts.size()) >= opt.starts) break;
        starts.push_back(std::sqrt(frac * ball.sigma / e1_norm2) * e1);
    }
    for (int k = 0; static_cast<int>(starts.size()) < opt.starts; ++k) {
        const double radius = k < 2 ? 1e-3 * std::sqrt(ball.sigma) : 0.9 * std::sqrt(ball.sigma) * (k % 3 + 1) / 3.0;
        starts.push_back(radius * random_dir(static_cast<std::uint64_t>(k)));
    }

    std::vector<detail::Descent> runs(starts.size());
    parallel_for(starts.size(), [&](std::size_t k) { runs[k] = detail::descend(p, llt, starts[k], ball.sigma, opt); });

    SolveReport rep;
    rep.sigma = ball.sigma;
    std::size_t best = 0;
    for (std::size_t k = 0; k < runs.size(); ++k) {
        rep.start_energies.push_back(runs[k].J);
        rep.half_threshold = std::max(rep.half_threshold, runs[k].half_threshold);
        if (runs[k].J < runs[best].J) best = k;
    }
    rep.best_start = static_cast<int>(best);
    rep.u = runs[best].u;
    rep.energy = runs[best].J;
    rep.iterations = runs[best].iterations;
    if (opt.newton_polish && rep.u.dot(A * rep.u) < ball.sigma * (1.0 - 1e-12))
        detail::newton_polish(p, rep.u, rep.energy, ball.sigma);
    // no start got below J(0) = 0
    if (!(rep.energy < 0.0)) {
        rep.u = Vector::Zero(n);
        rep.energy = energy(p, rep.u);
    }

    rep.x0_norm_sq = rep.u.dot(A * rep.u);
    rep.min_nodal = n > 0 ? rep.u.minCoeff() : 0.0;
    rep.max_nodal = n > 0 ? rep.u.maxCoeff() : 0.0;
    rep.nonnegative = verdict_of(rep.min_nodal >= -1e-10);
    const double gap = ball.sigma - rep.x0_norm_sq;
    if (gap >= 1e-12 * ball.sigma)
        rep.bound_F2 = Verdict::Pass;
    else if (std::abs(gap) < 1e-12 * ball.sigma)
        rep.bound_F2 = Verdict::Inconclusive;
    else
        rep.bound_F2 = Verdict::Fail;
    const Vector b = load_vector(p, rep.u);
    rep.residual = verify_weak_solution(p, rep.u, ball.sigma, opt.grad_tol * (1.0 + b.lpNorm<Eigen::Infinity>()));
    if (is_zero_nonlinearity(p.nl))
        rep.nontrivial = Verdict::NotApplicable;
    else
        rep.nontrivial = verdict_of(rep.energy < 0.0 && rep.u.lpNorm<Eigen::Infinity>() > 0.0);
    return rep;
}

}  // namespace fraclap
