#pragma once

#include "fraclap/core.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <vector>

namespace fraclap::quad {

/// Nodes and weights of a one-dimensional rule on [0, 1].
struct Rule1D {
    std::vector<double> x;
    std::vector<double> w;
    std::size_t size() const { return x.size(); }
};

/// Nodes (barycentric-free, in the reference triangle {(a,b): a,b >= 0, a+b <= 1})
/// and weights summing to 1/2.
struct RuleTri {
    std::vector<std::array<double, 2>> x;
    std::vector<double> w;
    std::size_t size() const { return x.size(); }
};

namespace detail {

inline Rule1D compute_gauss_legendre(int n) {
    Rule1D r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) {
        // Tricomi initial guess, then Newton on P_n.
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
        }
        // map [-1,1] -> [0,1]
        r.x[n - 1 - i] = 0.5 * (z + 1.0);
        r.w[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    return r;
}

}  // namespace detail

/// Gauss-Legendre rule with `n` points on [0, 1]; exact for degree 2n-1.
inline const Rule1D& gauss_legendre(int n) {
    if (n < 1 || n > 200) throw DomainError("gauss_legendre: order out of range");
    static std::mutex mtx;
    static std::map<int, std::unique_ptr<Rule1D>> cache;
    std::lock_guard lock(mtx);
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<Rule1D>(detail::compute_gauss_legendre(n));
    return *slot;
}

/// Composite rule on [0, 1] geometrically graded toward 0: layers
/// [q^{k+1}, q^k] with Gauss order growing away from the singular end.
/// Integrates t^p g(t) (p > -1, g smooth) to near machine precision.
inline Rule1D graded_toward_zero(int layers = 14, double ratio = 0.15, int base_order = 4,
                                 int max_order = 12) {
    Rule1D r;
    double hi = 1.0;
    for (int k = 0; k < layers; ++k) {
        const double lo = (k == layers - 1) ? 0.0 : hi * ratio;
        const int order = std::max(base_order, max_order - k);
        const auto& g = gauss_legendre(order);
        for (std::size_t i = 0; i < g.size(); ++i) {
            r.x.push_back(lo + (hi - lo) * g.x[i]);
            r.w.push_back((hi - lo) * g.w[i]);
        }
        hi = lo;
    }
    return r;
}

namespace detail {

inline RuleTri compute_triangle_rule(int n) {
    const auto& g = gauss_legendre(n);
    RuleTri r;
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = 0; j < g.size(); ++j) {
            const double a = g.x[i];
            const double b = g.x[j] * (1.0 - a);
            r.x.push_back({a, b});
            r.w.push_back(g.w[i] * g.w[j] * (1.0 - a));
        }
    }
    return r;
}

}  // namespace detail

/// Collapsed-coordinate (Duffy) rule on the reference triangle with n x n points.
inline const RuleTri& triangle_rule(int n) {
    const auto& g = gauss_legendre(n);  // validates n
    (void)g;
    static std::mutex mtx;
    static std::map<int, std::unique_ptr<RuleTri>> cache;
    std::lock_guard lock(mtx);
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<RuleTri>(detail::compute_triangle_rule(n));
    return *slot;
}

}  // namespace fraclap::quad
