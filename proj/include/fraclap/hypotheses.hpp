#pragma once

#include "fraclap/core.hpp"
#include "fraclap/expression.hpp"
#include "fraclap/parallel.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fraclap {

using ScalarFn = std::function<double(double)>;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Points 10^lo ... 10^hi with `per_decade` intervals per decade (endpoints included).
inline std::vector<double> log_grid(double lo_exp, double hi_exp, int per_decade) {
    const int count = static_cast<int>(std::lround((hi_exp - lo_exp) * per_decade));
    std::vector<double> g(count + 1);
    for (int j = 0; j <= count; ++j) g[j] = std::pow(10.0, lo_exp + static_cast<double>(j) / per_decade);
    return g;
}

/// Nonlinearity f with antiderivative F(xi) = int_0^xi f and growth exponent gamma.
class Nonlinearity {
public:
    /// f(t) = alpha t / (1 + t^2), F = (alpha/2) ln(1 + t^2).
    static Nonlinearity saturating(double alpha = 1.0) {
        Nonlinearity n;
        n.name_ = "saturating";
        n.f_ = [alpha](double t) { return alpha * t / (1.0 + t * t); };
        n.F_ = [alpha](double t) { return 0.5 * alpha * std::log1p(t * t); };
        n.gamma_ = 1.0;
        return n;
    }

    /// f(t) = scale |t|^{p-1} sign(t), F = scale |t|^p / p.
    static Nonlinearity power(double p, double scale = 1.0) {
        if (!(p >= 1.0)) throw ConfigError("f.p: must be at least 1");
        Nonlinearity n;
        n.name_ = "power";
        n.f_ = [p, scale](double t) {
            if (t == 0.0) return 0.0;
            return scale * std::pow(std::abs(t), p - 1.0) * (t > 0 ? 1.0 : -1.0);
        };
        n.F_ = [p, scale](double t) { return scale * std::pow(std::abs(t), p) / p; };
        n.gamma_ = p;
        return n;
    }

    /// f given by an expression in t; F by adaptive quadrature.
    static Nonlinearity expression(const std::string& text, double gamma) {
        const Expression e = Expression::parse(text);
        return from(e, {}, gamma, text);
    }

    /// General f; an empty F selects quadrature.
    static Nonlinearity from(ScalarFn f, ScalarFn F, double gamma, std::string name) {
        Nonlinearity n;
        n.name_ = std::move(name);
        n.f_ = std::move(f);
        n.F_ = std::move(F);
        n.gamma_ = gamma;
        if (!n.F_) n.table_ = tabulate(n.f_);
        return n;
    }

    double f(double t) const {
        if (truncated_ && t < 0.0) return f0_;
        return f_(t);
    }

    double F(double t) const {
        if (truncated_ && t < 0.0) return f0_ * t;
        if (F_) return F_(t);
        if (table_ && std::abs(t) <= table_->nodes.back()) return table_->eval(f_, t);
        return F_by_quadrature(t);
    }

    /// int_0^xi f by adaptive Gauss-Kronrod, whatever closed form is available.
    double F_by_quadrature(double xi) const {
        if (xi == 0.0) return 0.0;
        auto g = [this](double t) { return f(t); };
        return boost::math::quadrature::gauss_kronrod<double, 21>::integrate(g, 0.0, xi, 25, 1e-14);
    }

    double gamma() const { return gamma_; }
    bool is_truncated() const { return truncated_; }
    bool has_closed_form_F() const { return static_cast<bool>(F_); }
    const std::string& name() const { return name_; }

    /// f~(t) = f(t) for t >= 0 and f(0) for t < 0, with F~ updated accordingly.
    Nonlinearity truncated() const {
        Nonlinearity n = *this;
        if (!truncated_) {
            n.f0_ = f_(0.0);
            n.truncated_ = true;
        }
        return n;
    }

    /// c f, c F.
    Nonlinearity scaled(double c) const {
        Nonlinearity n = *this;
        auto f = f_;
        n.f_ = [f, c](double t) { return c * f(t); };
        if (F_) {
            auto F = F_;
            n.F_ = [F, c](double t) { return c * F(t); };
        }
        if (table_) {
            auto t = std::make_shared<Antiderivative>(*table_);
            for (double& v : t->values) v *= c;
            n.table_ = std::move(t);
        }
        n.f0_ = c * f0_;
        return n;
    }

private:
    // F at the nodes 0, +-10^{k/64} (|k/64| <= 8), then a 16-point Gauss rule
    // from the nearest node on the side of 0.
    struct Antiderivative {
        std::vector<double> nodes, values;  // ascending

        double eval(const ScalarFn& f, double t) const {
            auto it = std::upper_bound(nodes.begin(), nodes.end(), t);
            std::size_t k = static_cast<std::size_t>(it - nodes.begin());
            k = k == 0 ? 0 : k - 1;
            if (t < 0.0 && k + 1 < nodes.size()) ++k;  // integrate toward 0 from the node above
            if (t == nodes[k]) return values[k];
            return values[k] + boost::math::quadrature::gauss<double, 16>::integrate(f, nodes[k], t);
        }
    };

    static std::shared_ptr<const Antiderivative> tabulate(const ScalarFn& f) {
        auto tab = std::make_shared<Antiderivative>();
        const auto pos = log_grid(-8, 8, 64);
        for (auto it = pos.rbegin(); it != pos.rend(); ++it) tab->nodes.push_back(-*it);
        const std::size_t zero = tab->nodes.size();
        tab->nodes.push_back(0.0);
        tab->nodes.insert(tab->nodes.end(), pos.begin(), pos.end());
        tab->values.assign(tab->nodes.size(), 0.0);
        // adaptive next to 0, where f may be singular; elsewhere each interval
        // spans a factor 10^{1/64} and a fixed rule is exact to round-off
        auto piece = [&f](double lo, double hi) {
            if (lo == 0.0 || hi == 0.0)
                return boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, lo, hi, 15, 1e-12);
            return boost::math::quadrature::gauss<double, 20>::integrate(f, lo, hi);
        };
        for (std::size_t k = zero + 1; k < tab->nodes.size(); ++k)
            tab->values[k] = tab->values[k - 1] + piece(tab->nodes[k - 1], tab->nodes[k]);
        for (std::size_t k = zero; k-- > 0;) tab->values[k] = tab->values[k + 1] - piece(tab->nodes[k], tab->nodes[k + 1]);
        return tab;
    }

    std::shared_ptr<const Antiderivative> table_;
    std::string name_;
    ScalarFn f_, F_;
    double gamma_ = 1.0;
    bool truncated_ = false;
    double f0_ = 0.0;
};

/// Outcome of one hypothesis check, with the compared quantities.
struct CheckResult {
    Verdict verdict = Verdict::Fail;
    std::string label;
    double value = kNaN;
    double threshold = kNaN;
    std::string detail;
};

/// Auxiliary function psi with gamma_psi = sup psi(s)/|s|^q.
class AuxFunction {
public:
    /// psi(t) = |t|^q; gamma_psi = 1 exactly.
    static AuxFunction default_power(double q) {
        AuxFunction a;
        a.q_ = q;
        a.default_ = true;
        a.name_ = "|t|^q";
        a.psi_ = [q](double t) { return std::pow(std::abs(t), q); };
        a.gamma_ = 1.0;
        return a;
    }

    static AuxFunction expression(const std::string& text, double q) {
        AuxFunction a;
        a.q_ = q;
        a.name_ = text;
        a.psi_ = Expression::parse(text);
        double g = -kInf;
        for (double s : sample_points()) g = std::max(g, a.psi_(s) / std::pow(std::abs(s), q));
        a.gamma_ = g;
        return a;
    }

    double operator()(double t) const { return psi_(t); }

    double derivative(double t) const {
        if (default_) {
            if (t == 0.0) return 0.0;
            return q_ * std::pow(std::abs(t), q_ - 1.0) * (t > 0 ? 1.0 : -1.0);
        }
        const double h = 1e-6 * std::max(1.0, std::abs(t));
        return (psi_(t + h) - psi_(t - h)) / (2.0 * h);
    }

    double q() const { return q_; }
    double gamma_psi() const { return gamma_; }
    bool is_default() const { return default_; }
    const std::string& name() const { return name_; }

    /// Nonzero sample points +-10^k, k in [-8, 8], 64 per decade.
    static std::vector<double> sample_points() {
        std::vector<double> pos = log_grid(-8, 8, 64), out;
        for (auto it = pos.rbegin(); it != pos.rend(); ++it) out.push_back(-*it);
        out.insert(out.end(), pos.begin(), pos.end());
        return out;
    }

private:
    ScalarFn psi_;
    double q_ = 2.0;
    double gamma_ = 1.0;
    bool default_ = false;
    std::string name_;
};

namespace detail {

// Extreme value of `ratio` per decade of |s| for s in +-[1e-8, 1e8];
// returns {per-decade extremes in order of increasing |s|}.
inline std::vector<double> decade_extremes(const ScalarFn& ratio, bool take_max) {
    std::vector<double> out;
    for (int d = -8; d < 8; ++d) {
        double e = take_max ? -kInf : kInf;
        for (double s : log_grid(d, d + 1, 64)) {
            for (double x : {s, -s}) {
                const double v = ratio(x);
                if (!std::isfinite(v)) return {};
                e = take_max ? std::max(e, v) : std::min(e, v);
            }
        }
        out.push_back(e);
    }
    return out;
}

// True when the decade extremes stop growing (in the given direction) at the end.
inline bool settles(const std::vector<double>& ext, bool growing_up, bool at_front) {
    if (ext.size() < 2) return false;
    const double last = at_front ? ext[0] : ext.back();
    const double prev = at_front ? ext[1] : ext[ext.size() - 2];
    const double slack = 1e-3 * std::max(1.0, std::abs(prev));
    return growing_up ? last <= prev + slack : last >= prev - slack;
}

}  // namespace detail

/// (i1) sup psi > 0, (i2) inf psi/(1+|s|^q) > -inf, (i3) gamma_psi < +inf, on the sample grid.
inline std::array<CheckResult, 3> check_psi_family(const AuxFunction& psi) {
    std::array<CheckResult, 3> out;
    out[0].label = "i1";
    out[1].label = "i2";
    out[2].label = "i3";
    const double q = psi.q();
    if (psi.is_default()) {
        out[0] = {Verdict::Pass, "i1", kInf, 0.0, "psi = |t|^q is unbounded above"};
        out[1] = {Verdict::Pass, "i2", 0.0, -kInf, "psi >= 0"};
        out[2] = {Verdict::Pass, "i3", 1.0, kInf, "gamma_psi = 1 exactly"};
        return out;
    }
    double sup = -kInf;
    for (double s : AuxFunction::sample_points()) sup = std::max(sup, psi(s));
    sup = std::max(sup, psi(0.0));
    out[0].value = sup;
    out[0].threshold = 0.0;
    out[0].verdict = verdict_of(sup > 0.0);

    const auto lower = detail::decade_extremes([&](double s) { return psi(s) / (1.0 + std::pow(std::abs(s), q)); }, false);
    out[1].value = lower.empty() ? -kInf : *std::min_element(lower.begin(), lower.end());
    out[1].threshold = -kInf;
    out[1].verdict = verdict_of(!lower.empty() && detail::settles(lower, false, false));
    if (out[1].verdict == Verdict::Fail) out[1].detail = "psi(s)/(1+|s|^q) keeps decreasing at large |s|";

    const auto upper = detail::decade_extremes([&](double s) { return psi(s) / std::pow(std::abs(s), q); }, true);
    out[2].value = psi.gamma_psi();
    out[2].threshold = kInf;
    const bool ok = !upper.empty() && detail::settles(upper, true, true) && detail::settles(upper, true, false);
    out[2].verdict = verdict_of(ok && std::isfinite(psi.gamma_psi()));
    if (out[2].verdict == Verdict::Fail) out[2].detail = "psi(s)/|s|^q grows toward 0 or infinity";
    return out;
}

/// Class A: sup |f(t)|/(1 + |t|^{gamma-1}) finite (sampled up to |t| = 1e8), gamma in [1, 2*).
inline CheckResult check_class_A(const Nonlinearity& nl, double two_star) {
    CheckResult r;
    r.label = "class_A";
    const double g = nl.gamma();
    if (!(g >= 1.0) || !(g < two_star)) {
        r.verdict = Verdict::Fail;
        r.detail = "gamma outside [1, 2*)";
        return r;
    }
    const auto ext = detail::decade_extremes(
        [&](double t) { return std::abs(nl.f(t)) / (1.0 + std::pow(std::abs(t), g - 1.0)); }, true);
    r.value = ext.empty() ? kInf : *std::max_element(ext.begin(), ext.end());
    r.value = std::max(r.value, std::abs(nl.f(0.0)));
    r.threshold = kInf;
    r.verdict = verdict_of(!ext.empty() && detail::settles(ext, true, false));
    if (r.verdict == Verdict::Fail) r.detail = "|f(t)|/(1+|t|^{gamma-1}) grows at large |t|";
    return r;
}

/// (h1): t -> f(t)/t^{q-1} strictly decreasing on (1e-8, 1e8) and tending to 0.
///
/// Consecutive samples may not increase by more than 1e-12 relative
/// (rounding), each decade must end strictly below where it started, and the
/// last decade must lie below 1e-6 times the first value.
inline CheckResult check_h1(const Nonlinearity& nl, double q, int samples_per_decade = 2048) {
    if (samples_per_decade < 1000) throw ConfigError("check_h1: need at least 1000 samples per decade");
    CheckResult r;
    r.label = "h1";
    const auto t = log_grid(-8, 8, samples_per_decade);
    std::vector<double> v(t.size());
    for (std::size_t j = 0; j < t.size(); ++j) {
        v[j] = nl.f(t[j]) / std::pow(t[j], q - 1.0);
        if (!std::isfinite(v[j]))
            throw NumericError("check_h1: f(t)/t^{q-1} is not finite at t = " + std::to_string(t[j]));
    }
    r.value = v.back();
    r.threshold = 1e-6 * v.front();
    for (std::size_t j = 0; j + 1 < v.size(); ++j) {
        if (v[j + 1] > v[j] + 1e-12 * std::abs(v[j])) {
            r.verdict = Verdict::Fail;
            r.detail = "ratio increases near t = " + std::to_string(t[j]);
            return r;
        }
    }
    for (int d = 0; d < 16; ++d) {
        const std::size_t a = static_cast<std::size_t>(d) * samples_per_decade, b = a + samples_per_decade;
        if (!(v[b] < v[a])) {
            r.verdict = Verdict::Fail;
            r.detail = "ratio not strictly decreasing on [" + std::to_string(t[a]) + ", " + std::to_string(t[b]) + "]";
            return r;
        }
    }
    const std::size_t last = t.size() - 1 - samples_per_decade;
    double last_max = -kInf;
    for (std::size_t j = last; j < t.size(); ++j) last_max = std::max(last_max, v[j]);
    if (!(v.front() > 0.0) || !(last_max < 1e-6 * v.front())) {
        r.verdict = Verdict::Fail;
        r.detail = "ratio does not tend to 0 (last decade not below 1e-6 of the first value)";
        return r;
    }
    r.verdict = Verdict::Pass;
    return r;
}

/// Estimate of liminf_{xi -> 0+} F(xi)/xi^2.
struct LiminfEstimate {
    double value = 0.0;      // min of the finest-decade minimum and the extrapolated limit
    bool infinite = false;   // ratio diverges
    double finest_min = 0.0;
    double extrapolated = 0.0;
};

inline LiminfEstimate liminf_F_over_xi2_at_zero(const Nonlinearity& nl) {
    const auto xi = log_grid(-8, -1, 64);
    auto ratio = [&](double x) { return nl.F(x) / (x * x); };
    LiminfEstimate est;
    est.finest_min = kInf;
    double finest_max = -kInf;
    for (int j = 0; j <= 64; ++j) {
        const double v = ratio(xi[j]);
        est.finest_min = std::min(est.finest_min, v);
        finest_max = std::max(finest_max, v);
    }
    const double r8 = ratio(1e-8), r7 = ratio(1e-7);
    est.extrapolated = (10.0 * r8 - r7) / 9.0;
    const double slope = (r8 > 0 && r7 > 0) ? std::log10(r7 / r8) : 0.0;
    if (finest_max > 1e12 || slope < -0.5) {
        est.infinite = true;
        est.value = kInf;
        return est;
    }
    est.value = std::min(est.finest_min, est.extrapolated);
    return est;
}

/// lambda1 / (2 liminf); 0 when the liminf is infinite.
inline double alpha_threshold(double lambda1, const LiminfEstimate& liminf) {
    if (liminf.infinite) return 0.0;
    if (!(liminf.value > 0.0))
        throw HypothesisError("liminf F(xi)/xi^2 at 0+ is not positive (" + std::to_string(liminf.value) +
                              "); the existence criterion does not apply");
    return lambda1 / (2.0 * liminf.value);
}

/// (h2): liminf F(xi)/xi^2 > lambda1 / (2 essinf h).
inline CheckResult check_h2(const Nonlinearity& nl, double lambda1, double h_essinf) {
    CheckResult r;
    r.label = "h2";
    if (!(h_essinf > 0.0)) {
        r.verdict = Verdict::NotApplicable;
        r.detail = "essinf h must be positive";
        return r;
    }
    const auto est = liminf_F_over_xi2_at_zero(nl);
    r.value = est.value;
    r.threshold = lambda1 / (2.0 * h_essinf);
    r.verdict = verdict_of(est.infinite || est.value > r.threshold);
    return r;
}

/// Witness search for (h3) and its evidence.
struct H3Result {
    CheckResult check;
    double xi0 = kNaN;
    double lhs = kNaN;
    double rhs = kNaN;
    double margin = kNaN;  // (rhs - lhs) / rhs
};

/// Right-hand side xi^2 / (2 (c esssup h)^{2/q} ||h||_1^{(q-2)/q}).
inline double h3_bound(double xi, double q, double c_q, double h_esssup, double h_l1) {
    return xi * xi / (2.0 * std::pow(c_q * h_esssup, 2.0 / q) * std::pow(h_l1, (q - 2.0) / q));
}

/// (h3): first xi0 on a log grid over (1e-4, 1e6) with F(xi0) strictly below the bound.
inline H3Result check_h3(const Nonlinearity& nl, double q, double c_q, double h_esssup, double h_l1) {
    if (!(c_q > 0.0) || !(h_esssup > 0.0) || !(h_l1 > 0.0)) throw DomainError("check_h3: c_q and h statistics must be positive");
    H3Result out;
    out.check.label = "h3";
    for (double xi : log_grid(-4, 6, 64)) {
        const double lhs = nl.F(xi), rhs = h3_bound(xi, q, c_q, h_esssup, h_l1);
        if (lhs < rhs) {
            out.xi0 = xi;
            out.lhs = lhs;
            out.rhs = rhs;
            out.margin = (rhs - lhs) / rhs;
            out.check.verdict = Verdict::Pass;
            out.check.value = lhs;
            out.check.threshold = rhs;
            return out;
        }
    }
    out.check.verdict = Verdict::Fail;
    out.check.detail = "no xi0 in (1e-4, 1e6) satisfies the strict inequality";
    return out;
}

/// Global minima of g_lambda = lambda psi - phi found on the evidence grid.
struct GMinima {
    double lambda = 0.0;
    std::vector<double> points;  // empty when no minimum is attained on the grid
    double value = kNaN;
    bool coercive = false;
};

namespace detail {

// 0 and +-10^{k/64} for k/64 in [-8, 6], ascending.
inline const std::vector<double>& g_grid() {
    static const std::vector<double> grid = [] {
        const auto pos = log_grid(-8, 6, 64);
        std::vector<double> g;
        for (auto it = pos.rbegin(); it != pos.rend(); ++it) g.push_back(-*it);
        g.push_back(0.0);
        g.insert(g.end(), pos.begin(), pos.end());
        return g;
    }();
    return grid;
}

struct GFunction {
    const ScalarFn& phi;
    const ScalarFn& dphi;
    const AuxFunction& psi;
    double lambda;
    double operator()(double t) const { return lambda * psi(t) - phi(t); }
    double derivative(double t) const { return lambda * psi.derivative(t) - dphi(t); }
};

// Minimizer in [lo, hi] around a grid local minimum: golden section, then
// bisection on g' when it changes sign across the bracket.
inline double refine_minimum(const GFunction& g, double lo, double hi) {
    const double lo0 = lo, hi0 = hi;
    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
    double f1 = g(x1), f2 = g(x2);
    for (int it = 0; it < 200 && hi - lo > 1e-9 * std::max(1e-8, std::abs(x1)); ++it) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = g(x2);
        }
    }
    const double golden = f1 <= f2 ? x1 : x2;
    double a = lo0, b = hi0;
    double da = g.derivative(a), db = g.derivative(b);
    if (!(da < 0.0 && db > 0.0)) return golden;
    for (int it = 0; it < 300; ++it) {
        const double m = 0.5 * (a + b);
        if (m <= a || m >= b) break;
        const double dm = g.derivative(m);
        if (dm == 0.0) {
            a = b = m;
            break;
        }
        if (dm < 0.0)
            a = m;
        else
            b = m;
    }
    const double bis = 0.5 * (a + b);
    const double gb = g(bis), gg = g(golden);
    return gb <= gg + 1e-14 * std::max(1.0, std::abs(gg)) ? bis : golden;
}

}  // namespace detail

/// Global minimizers of lambda psi - phi on [-1e6, 1e6] (log-dense grid plus refinement).
///
/// A minimum at a grid end, or a function that does not grow over the last
/// decade at either end, is reported as non-coercive with no minimizers.
inline GMinima global_minima(const ScalarFn& phi, const ScalarFn& dphi, const AuxFunction& psi, double lambda) {
    const auto& t = detail::g_grid();
    const detail::GFunction g{phi, dphi, psi, lambda};
    GMinima out;
    out.lambda = lambda;
    const std::size_t n = t.size();
    std::vector<double> v(n);
    std::size_t best = 0;
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = g(t[i]);
        if (!std::isfinite(v[i])) return out;  // overflow: no coercivity evidence
        if (v[i] < v[best]) best = i;
    }
    const std::size_t dec = 64;
    out.coercive = best != 0 && best != n - 1 && v[0] > v[dec] && v[n - 1] > v[n - 1 - dec];
    if (!out.coercive) return out;

    const double gmin = v[best];
    const double window = 1e-3 * std::max(1.0, std::abs(gmin));
    std::vector<std::pair<double, double>> cand;  // (point, value)
    for (std::size_t i = 1; i + 1 < n && cand.size() < 256; ++i) {
        if (v[i] <= v[i - 1] && v[i] <= v[i + 1] && v[i] <= gmin + window) {
            const double x = detail::refine_minimum(g, t[i - 1], t[i + 1]);
            cand.emplace_back(x, g(x));
        }
    }
    double m = kInf;
    for (const auto& c : cand) m = std::min(m, c.second);
    out.value = m;
    const double tol = 1e-9 * std::max(1.0, std::abs(m));
    for (const auto& [x, gx] : cand) {
        if (gx > m + tol) continue;
        bool dup = false;
        for (double y : out.points) dup = dup || std::abs(x - y) <= 1e-6 * std::max(1.0, std::abs(y));
        if (!dup) out.points.push_back(x);
    }
    return out;
}

/// Coercivity, uniqueness of global minima, and the levels alpha(phi,psi,b), beta(phi,psi,a).
struct GLambdaAnalysis {
    double a = 0.0;
    double b = kInf;
    std::vector<GMinima> samples;
    Verdict coercive = Verdict::Fail;
    Verdict unique = Verdict::Fail;
    double inf_psi = kNaN;
    double sup_psi = kNaN;
    std::vector<double> minima_at_a;  // M(phi, psi, a)
    std::vector<double> minima_at_b;  // M(phi, psi, b); empty when b = +inf
    double alpha_val = kNaN;
    double beta_val = kNaN;

    Verdict alpha_lt_beta() const { return verdict_of(alpha_val < beta_val); }
};

/// Samples lambda log-uniformly inside (a, b) (a = 0 starts at 1e-4, b = +inf ends at 1e4).
inline GLambdaAnalysis analyze_g_lambda(const ScalarFn& phi, const ScalarFn& dphi, const AuxFunction& psi, double a,
                                        double b, int lambda_samples = 16) {
    if (!(a >= 0.0) || !(a < b)) throw ConfigError("a, b: need 0 <= a < b");
    if (lambda_samples < 8) throw ConfigError("analyze_g_lambda: need at least 8 lambda samples");
    GLambdaAnalysis out;
    out.a = a;
    out.b = b;
    const double lo = a > 0.0 ? a : std::min(1e-4, 0.5 * b);
    const double hi = std::isfinite(b) ? b : std::max(1e4, 2.0 * lo);
    out.samples.resize(lambda_samples);
    parallel_for(static_cast<std::size_t>(lambda_samples), [&](std::size_t k) {
        const double lam = lo * std::pow(hi / lo, (k + 0.5) / lambda_samples);
        out.samples[k] = global_minima(phi, dphi, psi, lam);
    });
    bool coercive = true, unique = true;
    for (const auto& s : out.samples) {
        coercive = coercive && s.coercive;
        unique = unique && s.points.size() == 1;
    }
    out.coercive = verdict_of(coercive);
    out.unique = verdict_of(unique);

    const auto& t = detail::g_grid();
    std::size_t imin = 0, imax = 0;
    std::vector<double> pv(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        pv[i] = psi(t[i]);
        if (pv[i] < pv[imin]) imin = i;
        if (pv[i] > pv[imax]) imax = i;
    }
    const std::size_t last = t.size() - 1;
    out.inf_psi = (imin == 0 || imin == last) ? -kInf : pv[imin];
    out.sup_psi = (imax == 0 || imax == last) ? kInf : pv[imax];

    if (std::isfinite(b)) out.minima_at_b = global_minima(phi, dphi, psi, b).points;
    out.minima_at_a = global_minima(phi, dphi, psi, a).points;
    double sup_b = -kInf, inf_a = kInf;
    for (double x : out.minima_at_b) sup_b = std::max(sup_b, psi(x));
    for (double x : out.minima_at_a) inf_a = std::min(inf_a, psi(x));
    out.alpha_val = std::max(out.inf_psi, sup_b);
    out.beta_val = std::min(out.sup_psi, inf_a);
    return out;
}

/// phi = F, phi' = f.
inline GLambdaAnalysis analyze_g_lambda(const Nonlinearity& nl, const AuxFunction& psi, double a, double b,
                                        int lambda_samples = 16) {
    return analyze_g_lambda([&nl](double t) { return nl.F(t); }, [&nl](double t) { return nl.f(t); }, psi, a, b,
                            lambda_samples);
}

/// lambda_r with the unique global minimizer xi* of g_{lambda_r} on psi^{-1}(r).
struct LevelParameter {
    double r = kNaN;
    double lambda_r = kNaN;
    double xi_star = kNaN;
    double psi_value = kNaN;
    bool grid_minimal = false;  // g(xi*) <= g on the evidence grid
};

/// Bisection on lambda -> psi(xi*_lambda), which is non-increasing in lambda.
inline LevelParameter find_level_parameter(const ScalarFn& phi, const ScalarFn& dphi, const AuxFunction& psi, double r,
                                           const GLambdaAnalysis& an) {
    if (!(an.alpha_val < r && r < an.beta_val))
        throw DomainError("find_level_parameter: r = " + std::to_string(r) + " is outside (alpha, beta) = (" +
                          std::to_string(an.alpha_val) + ", " + std::to_string(an.beta_val) + ")");
    const double tol = 1e-8 * std::max(1.0, r);
    auto minimizer = [&](double lam) {
        const auto gm = global_minima(phi, dphi, psi, lam);
        if (gm.points.empty())
            throw NumericError("find_level_parameter: no global minimum on the grid at lambda = " + std::to_string(lam));
        double x = gm.points.front();
        for (double y : gm.points)
            if (psi(y) > psi(x)) x = y;
        return x;
    };
    auto excess = [&](double lam) { return psi(minimizer(lam)) - r; };
    auto finish = [&](double lam) {
        LevelParameter lp;
        lp.r = r;
        lp.lambda_r = lam;
        lp.xi_star = minimizer(lam);
        lp.psi_value = psi(lp.xi_star);
        const detail::GFunction g{phi, dphi, psi, lam};
        const double gx = g(lp.xi_star);
        bool ok = true;
        for (double t : detail::g_grid()) ok = ok && gx <= g(t) + 1e-12 * std::max(1.0, std::abs(gx));
        lp.grid_minimal = ok;
        return lp;
    };

    const bool geometric = an.a == 0.0 || !std::isfinite(an.b);
    double lo = an.a > 0.0 ? an.a * (1.0 + 1e-9) : std::min(1.0, std::isfinite(an.b) ? 0.5 * an.b : 1.0);
    double hi = std::isfinite(an.b) ? an.b * (1.0 - 1e-9) : std::max(1.0, 2.0 * lo);
    double slo = excess(lo), shi = excess(hi);
    for (int k = 0; slo < 0.0 && an.a == 0.0 && k < 40; ++k) {
        hi = lo;
        shi = slo;
        lo /= 10.0;
        slo = excess(lo);
    }
    for (int k = 0; shi > 0.0 && !std::isfinite(an.b) && k < 40; ++k) {
        lo = hi;
        slo = shi;
        hi *= 10.0;
        shi = excess(hi);
    }
    if (std::abs(slo) <= tol) return finish(lo);
    if (std::abs(shi) <= tol) return finish(hi);
    if (slo > 0.0 && shi < 0.0) {
        for (int it = 0; it < 400; ++it) {
            const double mid = geometric ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            const double sm = excess(mid);
            if (std::abs(sm) <= tol) return finish(mid);
            if (sm > 0.0)
                lo = mid;
            else
                hi = mid;
        }
    }
    // fallback: dense scan
    const double scan_lo = an.a > 0.0 ? an.a * (1.0 + 1e-9) : 1e-8;
    const double scan_hi = std::isfinite(an.b) ? an.b * (1.0 - 1e-9) : 1e8;
    double best = kNaN, best_err = kInf;
    for (int k = 0; k <= 2000; ++k) {
        const double lam = scan_lo * std::pow(scan_hi / scan_lo, k / 2000.0);
        try {
            const double e = std::abs(excess(lam));
            if (e < best_err) {
                best_err = e;
                best = lam;
            }
        } catch (const NumericError&) {
        }
    }
    if (best_err <= tol) return finish(best);
    throw NumericError("find_level_parameter: psi(xi*_lambda) does not reach r = " + std::to_string(r) +
                       " (closest gap " + std::to_string(best_err) + ")");
}

inline LevelParameter find_level_parameter(const Nonlinearity& nl, const AuxFunction& psi, double r,
                                           const GLambdaAnalysis& an) {
    return find_level_parameter([&nl](double t) { return nl.F(t); }, [&nl](double t) { return nl.f(t); }, psi, r, an);
}

/// Both sides of the level inequality sup_{psi^{-1}(r)} F < r^{2/q} / (2 (c gamma_psi esssup h)^{2/q} ||h||_1^{(q-2)/q}).
struct ConditionF {
    CheckResult check;
    double r = kNaN;
    double lhs = kNaN;
    double rhs = kNaN;
    double margin = kNaN;  // (rhs - lhs) / rhs
};

inline double condition_F_rhs(double r, double q, double c_q, double gamma_psi, double h_esssup, double h_l1) {
    return std::pow(r, 2.0 / q) /
           (2.0 * std::pow(c_q * gamma_psi * h_esssup, 2.0 / q) * std::pow(h_l1, (q - 2.0) / q));
}

inline ConditionF check_condition_F(const Nonlinearity& nl, const AuxFunction& psi, const LevelParameter& lp,
                                    double c_q, double h_esssup, double h_l1) {
    ConditionF out;
    out.r = lp.r;
    out.lhs = nl.F(lp.xi_star);
    out.rhs = condition_F_rhs(lp.r, psi.q(), c_q, psi.gamma_psi(), h_esssup, h_l1);
    out.margin = (out.rhs - out.lhs) / out.rhs;
    out.check.label = "F";
    out.check.value = out.lhs;
    out.check.threshold = out.rhs;
    out.check.verdict = verdict_of(out.lhs < out.rhs);
    return out;
}

/// Scan of admissible r: log grid (8 per decade) over (alpha, beta) clipped to [1e-6, 1e6].
struct RSearch {
    std::vector<double> passing;     // every r on the grid satisfying the inequality
    std::optional<LevelParameter> level;
    std::optional<ConditionF> condition;  // the selected r (largest relative margin), or the best failing one
};

inline RSearch search_r(const Nonlinearity& nl, const AuxFunction& psi, const GLambdaAnalysis& an, double c_q,
                        double h_esssup, double h_l1) {
    std::vector<double> grid;
    for (double r : log_grid(-6, 6, 8))
        if (an.alpha_val < r && r < an.beta_val) grid.push_back(r);
    struct Item {
        std::optional<LevelParameter> lp;
        std::optional<ConditionF> cf;
    };
    std::vector<Item> items(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        try {
            const auto lp = find_level_parameter(nl, psi, grid[i], an);
            items[i].lp = lp;
            items[i].cf = check_condition_F(nl, psi, lp, c_q, h_esssup, h_l1);
        } catch (const NumericError&) {
        }
    });
    RSearch out;
    std::optional<std::size_t> best;
    bool best_passes = false;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!items[i].cf) continue;
        const bool pass = items[i].cf->check.verdict == Verdict::Pass;
        if (pass) out.passing.push_back(grid[i]);
        if (!best || (pass && !best_passes) || (pass == best_passes && items[i].cf->margin > items[*best].cf->margin)) {
            best = i;
            best_passes = pass;
        }
    }
    if (best) {
        out.level = items[*best].lp;
        out.condition = items[*best].cf;
    }
    return out;
}

}  // namespace fraclap
