#pragma once

#include "fraclap/core.hpp"
#include "fraclap/mesh.hpp"
#include "fraclap/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fraclap {

enum class KernelVariant { FractionalPower, TabulatedRadial };

/// Radial nonlocal kernel K(x) = k(|x|) on R^n \ {0}, n in {1, 2}.
///
/// FractionalPower is the un-normalized model kernel |x|^{-(n+2s)}: no C(n,s)
/// constant is applied, so eigenvalues differ from the normalized fractional
/// Laplacian by that constant.
///
/// TabulatedRadial interpolates a profile log-log linearly between table
/// radii. Pointwise evaluation outside the table throws; the radial moments
/// and tails used by assembly continue the first/last table segment as a
/// power law so that integrals over (0, inf) are defined.
class Kernel {
public:
    static Kernel fractional(int n, double s, double beta = 1.0) {
        Kernel k(n, s, beta);
        k.variant_ = KernelVariant::FractionalPower;
        return k;
    }

    static Kernel tabulated(int n, double s, double beta, std::vector<double> radii, std::vector<double> values) {
        Kernel k(n, s, beta);
        k.variant_ = KernelVariant::TabulatedRadial;
        if (radii.size() < 2 || radii.size() != values.size())
            throw ConfigError("kernel.table: need at least two (radius, value) rows");
        for (std::size_t i = 0; i < radii.size(); ++i) {
            if (!(radii[i] > 0.0) || !(values[i] > 0.0) || !std::isfinite(values[i]))
                throw ConfigError("kernel.table: radii and values must be positive and finite");
            if (i > 0 && !(radii[i] > radii[i - 1])) throw ConfigError("kernel.table: radii must be strictly increasing");
        }
        k.radii_ = std::move(radii);
        k.values_ = std::move(values);
        k.slopes_.resize(k.radii_.size() - 1);
        for (std::size_t i = 0; i + 1 < k.radii_.size(); ++i)
            k.slopes_[i] = std::log(k.values_[i + 1] / k.values_[i]) / std::log(k.radii_[i + 1] / k.radii_[i]);
        return k;
    }

    int dimension() const { return n_; }
    double order() const { return s_; }
    double beta() const { return beta_; }
    KernelVariant variant() const { return variant_; }
    const std::vector<double>& table_radii() const { return radii_; }

    /// Exponent n + 2s of the model power law.
    double power() const { return n_ + 2.0 * s_; }

    /// 2n/(n-2s), or +inf when n <= 2s.
    double critical_exponent() const { return n_ > 2.0 * s_ ? 2.0 * n_ / (n_ - 2.0 * s_) : kInf; }

    /// Profile k(r), r > 0.
    double radial(double r) const {
        if (!(r > 0.0)) throw DomainError("kernel: evaluation at the origin");
        if (variant_ == KernelVariant::FractionalPower) return std::pow(r, -power());
        if (r < radii_.front() || r > radii_.back())
            throw DomainError("kernel: radius " + std::to_string(r) + " outside tabulated range");
        const auto it = std::upper_bound(radii_.begin(), radii_.end(), r);
        std::size_t i = static_cast<std::size_t>(it - radii_.begin());
        i = std::min(i == 0 ? 0 : i - 1, slopes_.size() - 1);
        return values_[i] * std::pow(r / radii_[i], slopes_[i]);
    }

    double evaluate(const Point& x) const {
        const double r = n_ == 1 ? std::abs(x[0]) : x.norm();
        if (r == 0.0) throw DomainError("kernel: evaluation at x = 0");
        return radial(r);
    }

    /// int_0^L rho^m k(rho) d rho (closed form per variant). +inf if divergent.
    double moment(int m, double L) const {
        if (!(L > 0.0)) return 0.0;
        if (variant_ == KernelVariant::FractionalPower) {
            const double e = m + 1.0 - power();
            if (e <= 0.0) return kInf;
            return std::pow(L, e) / e;
        }
        return tabulated_integral(m, 0.0, L);
    }

    /// int_R^inf rho^m k(rho) d rho (closed form per variant). +inf if divergent.
    double tail(int m, double R) const {
        if (!(R > 0.0)) return kInf;
        if (variant_ == KernelVariant::FractionalPower) {
            const double e = m + 1.0 - power();
            if (e >= 0.0) return kInf;
            return -std::pow(R, e) / e;
        }
        return tabulated_integral(m, R, kInf);
    }

private:
    Kernel(int n, double s, double beta) : n_(n), s_(s), beta_(beta) {
        if (n != 1 && n != 2) throw ConfigError("kernel: dimension must be 1 or 2");
        if (!(s > 0.0 && s < 1.0)) throw ConfigError("kernel: s must lie in (0, 1)");
        if (!(beta > 0.0)) throw ConfigError("kernel: beta must be positive");
    }

    // int_a^b rho^m v (rho/r0)^e d rho
    static double power_segment(int m, double v, double r0, double e, double a, double b) {
        const double p = m + e + 1.0;
        const double c = v * std::pow(r0, -e);
        if (std::abs(p) < 1e-14) return c * std::log(b / a);
        if (b == kInf) return p < 0.0 ? -c * std::pow(a, p) / p : kInf;
        if (a == 0.0) return p > 0.0 ? c * std::pow(b, p) / p : kInf;
        return c * (std::pow(b, p) - std::pow(a, p)) / p;
    }

    double tabulated_integral(int m, double a, double b) const {
        double total = 0.0;
        const std::size_t last = radii_.size() - 1;
        // below the table: first segment's power law
        if (a < radii_.front()) {
            total += power_segment(m, values_.front(), radii_.front(), slopes_.front(), a, std::min(b, radii_.front()));
        }
        for (std::size_t i = 0; i < last; ++i) {
            const double lo = std::max(a, radii_[i]), hi = std::min(b, radii_[i + 1]);
            if (lo < hi) total += power_segment(m, values_[i], radii_[i], slopes_[i], lo, hi);
        }
        if (b > radii_.back()) {
            total += power_segment(m, values_.back(), radii_.back(), slopes_.back(), std::max(a, radii_.back()), b);
        }
        return total;
    }

    int n_;
    double s_;
    double beta_;
    KernelVariant variant_ = KernelVariant::FractionalPower;
    std::vector<double> radii_, values_, slopes_;
};

/// Reads a two-column CSV (radius, value). Blank lines and lines starting
/// with '#' are skipped, as is a non-numeric header row.
inline std::pair<std::vector<double>, std::vector<double>> read_radial_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("kernel.table_path: cannot open '" + path + "'");
    std::vector<double> r, v;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        for (auto& ch : line)
            if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
        std::istringstream ss(line);
        double a, b;
        if (!(ss >> a >> b)) {
            if (r.empty()) continue;
            throw ConfigError("kernel.table_path: malformed row '" + line + "'");
        }
        r.push_back(a);
        v.push_back(b);
    }
    return {std::move(r), std::move(v)};
}

/// Generic quadrature route for the radial moment, independent of the closed forms.
inline double numeric_moment(const Kernel& k, int m, double L) {
    boost::math::quadrature::tanh_sinh<double> integrator;
    return integrator.integrate([&](double rho) { return rho > 0.0 ? std::pow(rho, m) * k.radial(rho) : 0.0; },
                                0.0, L, 1e-13);
}

/// Generic quadrature route for the radial tail: substitution rho = R e^u and
/// unit-length shells in u until the geometric remainder estimate is negligible.
inline double numeric_tail(const Kernel& k, int m, double R) {
    const auto& g = quad::gauss_legendre(24);
    double total = 0.0, prev = 0.0;
    for (int shell = 0; shell < 4000; ++shell) {
        double part = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double u = shell + g.x[i];
            const double rho = R * std::exp(u);
            part += g.w[i] * std::pow(rho, m + 1) * k.radial(rho);
        }
        total += part;
        if (shell > 4 && part < prev) {
            const double ratio = part / prev;
            const double remainder = part * ratio / (1.0 - ratio);
            if (remainder < 1e-15 * total) return total + remainder;
        }
        prev = part;
    }
    throw NumericError("numeric_tail: no convergence");
}

enum class Route { ClosedForm, Generic };

namespace detail {

// int_{phi_a}^{phi_b} cos^p(phi) d phi for phi in (-pi/2, pi/2).
inline double cos_power_integral(double p, double phi_a, double phi_b) {
    auto F = [p](double phi) {
        const double s = std::sin(phi);
        const double v = 0.5 * boost::math::beta(0.5, 0.5 * (p + 1.0), s * s);
        return phi < 0.0 ? -v : v;
    };
    return F(phi_b) - F(phi_a);
}

}  // namespace detail

/// k(x) = int_{R^n \ Omega} K(x - y) dy for x strictly inside the domain.
/// In 1D: tail(d_left) + tail(d_right). In 2D: angular integral of the radial
/// tail up to the rectangle boundary, split at the four corner directions.
/// The ClosedForm route uses analytic tails (and, for the power kernel in 2D,
/// an incomplete-beta formula for the angular integral); the Generic route
/// integrates the kernel profile numerically.
inline double exterior_weight(const Kernel& kernel, const Domain& dom, const Point& x,
                              Route route = Route::ClosedForm);

namespace detail {

// exterior_weight without the distance guard; requires x strictly inside.
inline double exterior_weight_raw(const Kernel& kernel, const Domain& dom, const Point& x, Route route) {
    auto tail = [&](int m, double R) {
        return route == Route::ClosedForm ? kernel.tail(m, R) : numeric_tail(kernel, m, R);
    };
    if (dom.dim == 1) return tail(0, x[0] - dom.x0) + tail(0, dom.x1 - x[0]);

    const double dR = dom.x1 - x[0], dT = dom.y1 - x[1], dL = x[0] - dom.x0, dB = x[1] - dom.y0;
    // sectors as (normal distance, relative angle range)
    const double aRT = std::atan2(dT, dR), aTL = std::atan2(dT, dL), aLB = std::atan2(dB, dL), aBR = std::atan2(dB, dR);
    const std::array<std::array<double, 3>, 4> sectors{{
        {dR, -aBR, aRT},
        {dT, -(kPi / 2 - aRT), kPi / 2 - aTL},
        {dL, -aTL, aLB},
        {dB, -(kPi / 2 - aLB), kPi / 2 - aBR},
    }};
    const bool closed = route == Route::ClosedForm && kernel.variant() == KernelVariant::FractionalPower;
    double total = 0.0;
    for (const auto& [d, lo, hi] : sectors) {
        if (closed) {
            const double ts = 2.0 * kernel.order();
            total += std::pow(d, -ts) / ts * detail::cos_power_integral(ts, lo, hi);
        } else {
            total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                [&](double phi) { return tail(1, d / std::cos(phi)); }, lo, hi, 15, 1e-12);
        }
    }
    return total;
}

}  // namespace detail

inline double exterior_weight(const Kernel& kernel, const Domain& dom, const Point& x, Route route) {
    const double dist = dom.boundary_distance(x);
    if (dist <= 1e-12) throw DomainError("exterior_weight: point on or outside the boundary (weight unbounded)");
    return detail::exterior_weight_raw(kernel, dom, x, route);
}

/// Outcome of checking kernel conditions (k1)-(k3) on sampled radii.
struct KernelCertificate {
    Verdict k1 = Verdict::Fail;
    Verdict k2 = Verdict::Fail;
    Verdict k3 = Verdict::Fail;
    std::string k1_detail, k2_detail, k3_detail;
    double offending_radius = 0.0;  // set when a non-finite value was met

    bool all_pass() const { return k1 == Verdict::Pass && k2 == Verdict::Pass && k3 == Verdict::Pass; }
};

/// Numerically checks (k1) integrability of min{|x|^2,1} K, (k2) the lower
/// bound K >= beta |x|^{-(n+2s)}, and (k3) evenness. Radii are log-uniform
/// on [1e-6, 1e6] (clipped to the table range for tabulated kernels).
/// (k1) passes when the dyadic-shell contributions toward 0 and toward
/// infinity both shrink with ratio < 0.9 over their last 10 shells.
inline KernelCertificate validate_conditions(const Kernel& kernel, int sample_budget) {
    if (sample_budget < 100) throw ConfigError("validate_conditions: sample_budget must be >= 100");
    KernelCertificate cert;
    double rmin = 1e-6, rmax = 1e6;
    if (kernel.variant() == KernelVariant::TabulatedRadial) {
        rmin = std::max(rmin, kernel.table_radii().front());
        rmax = std::min(rmax, kernel.table_radii().back());
    }
    const int n = kernel.dimension();
    auto point_at = [n](double r, int j) {
        if (n == 1) return Point(r);
        const double th = j * 2.399963229728653;  // golden angle
        return Point(r * std::cos(th), r * std::sin(th));
    };

    bool k2_ok = true, k3_ok = true, finite = true;
    for (int j = 0; j < sample_budget && finite; ++j) {
        const double r = rmin * std::pow(rmax / rmin, static_cast<double>(j) / (sample_budget - 1));
        const Point x = point_at(r, j);
        const double kp = kernel.evaluate(x), km = kernel.evaluate(-x);
        if (!std::isfinite(kp) || !std::isfinite(km)) {
            finite = false;
            cert.offending_radius = r;
            break;
        }
        if (kp != km) {
            k3_ok = false;
            cert.k3_detail = "asymmetry at r=" + std::to_string(r);
        }
        const double bound = kernel.beta() * std::pow(r, -kernel.power());
        if (kp < bound * (1.0 - 1e-12)) {
            if (k2_ok) cert.k2_detail = "K below beta|x|^{-(n+2s)} at r=" + std::to_string(r);
            k2_ok = false;
        }
    }
    if (!finite) {
        const std::string msg = "non-finite kernel value at r=" + std::to_string(cert.offending_radius);
        cert.k1_detail = cert.k2_detail = cert.k3_detail = msg;
        return cert;
    }
    cert.k2 = verdict_of(k2_ok);
    cert.k3 = verdict_of(k3_ok);

    // (k1): shells [lo, 2 lo] with gamma(r) K(r) |S^{n-1}| r^{n-1}
    const double sphere = n == 1 ? 2.0 : 2.0 * kPi;
    const auto& g = quad::gauss_legendre(16);
    auto shell = [&](double lo) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double r = lo * std::pow(2.0, g.x[i]);  // log-uniform substitution
            const double jac = r * std::log(2.0);
            acc += g.w[i] * jac * std::min(r * r, 1.0) * kernel.radial(r) * sphere * std::pow(r, n - 1);
        }
        return acc;
    };
    auto converges = [&](bool inward, std::string& why) {
        std::vector<double> parts;
        for (int k = 0;; ++k) {
            const double lo = inward ? std::pow(2.0, -k - 1) : std::pow(2.0, k);
            if (inward ? lo < rmin : 2.0 * lo > rmax) break;
            const double v = shell(lo);
            if (!std::isfinite(v)) {
                cert.offending_radius = lo;
                why = "non-finite shell integral at r=" + std::to_string(lo);
                return false;
            }
            parts.push_back(v);
        }
        if (parts.size() < 11) {
            why = "insufficient radial range for 10 shells";
            return false;
        }
        for (std::size_t i = parts.size() - 10; i < parts.size(); ++i) {
            const double ratio = parts[i] / parts[i - 1];
            if (!(ratio < 0.9)) {
                why = std::string(inward ? "near-origin" : "far-field") + " shells do not contract (ratio " +
                      std::to_string(ratio) + ")";
                return false;
            }
        }
        return true;
    };
    std::string why;
    const bool k1_ok = converges(true, why) && converges(false, why);
    cert.k1 = verdict_of(k1_ok);
    cert.k1_detail = why;
    return cert;
}

}  // namespace fraclap
