#pragma once

#include "fraclap/core.hpp"

#include <Eigen/Cholesky>

namespace fraclap {

/// Smallest generalized eigenpair of A e = lambda M e, normalized e^T M e = 1.
struct EigenPair {
    double lambda = 0.0;
    Vector e;
    double residual = 0.0;  // ||A e - lambda M e||_2
    int iterations = 0;
};

inline double rayleigh_quotient(const Matrix& A, const Matrix& M, const Vector& v) {
    return v.dot(A * v) / v.dot(M * v);
}

namespace detail {

// Largest-magnitude entry made positive; ties resolved by the lowest index.
inline void fix_sign(Vector& e) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < e.size(); ++i)
        if (std::abs(e[i]) > std::abs(e[best])) best = i;
    if (e[best] < 0.0) e = -e;
}

}  // namespace detail

/// Inverse iteration with a Cholesky factorization of A.
///
/// Converges to the smallest eigenvalue because the first eigenvalue of the
/// nonlocal Dirichlet problem is simple. Throws NumericError if A is not
/// positive definite or the residual test ||A e - lambda M e|| <= tol lambda
/// is not met within `max_iters` iterations.
inline EigenPair first_eigenpair(const Matrix& A, const Matrix& M, double tol = 1e-10, int max_iters = 2000) {
    if (A.rows() == 0 || A.rows() != A.cols() || M.rows() != A.rows())
        throw DomainError("first_eigenpair: incompatible matrices");
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() != Eigen::Success) throw NumericError("first_eigenpair: stiffness matrix is not positive definite");

    auto m_normalize = [&M](Vector& v) { v /= std::sqrt(v.dot(M * v)); };
    // positive start: the first eigenvector is single-signed
    Vector v = Vector::Ones(A.rows());
    m_normalize(v);
    EigenPair out;
    for (int it = 1; it <= max_iters; ++it) {
        v = llt.solve(M * v);
        m_normalize(v);
        const double lambda = v.dot(A * v);
        const double res = (A * v - lambda * (M * v)).norm();
        out.lambda = lambda;
        out.residual = res;
        out.iterations = it;
        if (res <= tol * lambda) {
            detail::fix_sign(v);
            out.e = v;
            return out;
        }
    }
    throw NumericError("first_eigenpair: residual " + std::to_string(out.residual) + " above tolerance after " +
                       std::to_string(max_iters) + " iterations");
}

}  // namespace fraclap
