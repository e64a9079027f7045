#pragma once

#include "fraclap/core.hpp"
#include "fraclap/kernel.hpp"
#include "fraclap/mesh.hpp"
#include "fraclap/parallel.hpp"
#include "fraclap/quadrature.hpp"

#include <functional>
#include <unordered_map>
#include <vector>

namespace fraclap {

/// Discrete Gagliardo form over Q and the P1 mass matrix on the interior dofs.
///
/// A_ij = int int_{R^n x R^n} (phi_i(x)-phi_i(y)) (phi_j(x)-phi_j(y)) K(x-y) dx dy,
/// with the full double integral (every unordered pair counted twice). Since
/// the zero-extended basis vanishes outside the domain this equals the
/// Omega x Omega integral plus 2 int_Omega phi_i phi_j k(x) dx, where k is the
/// exterior weight; `exterior_diag` holds the diagonal of that second part.
struct StiffnessSystem {
    Matrix A;
    Matrix M;
    Vector exterior_diag;
    int quadrature_order = 6;
    std::size_t pair_classes = 0;  // distinct element-pair geometries integrated

    std::size_t size() const { return static_cast<std::size_t>(A.rows()); }

    double norm_sq(const Vector& u) const { return u.dot(A * u); }
};

/// Nonnegative coefficient h: a constant or one value per element.
class HField {
public:
    static HField constant(double c) {
        if (!(c >= 0.0) || !std::isfinite(c)) throw DomainError("h: negative or non-finite value");
        HField f;
        f.constant_ = c;
        return f;
    }
    static HField piecewise(std::vector<double> values) {
        for (double v : values)
            if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("h: negative or non-finite value");
        HField f;
        f.values_ = std::move(values);
        return f;
    }

    bool is_constant() const { return values_.empty(); }

    double on_element(std::size_t e) const {
        if (values_.empty()) return constant_;
        if (e >= values_.size()) throw DomainError("h: missing value for element " + std::to_string(e));
        return values_[e];
    }

    double ess_sup(const Mesh& m) const {
        if (is_constant()) return constant_;
        check_size(m);
        return *std::max_element(values_.begin(), values_.end());
    }
    double ess_inf(const Mesh& m) const {
        if (is_constant()) return constant_;
        check_size(m);
        return *std::min_element(values_.begin(), values_.end());
    }
    double l1_norm(const Mesh& m) const {
        if (is_constant()) return constant_ * m.domain.measure();
        check_size(m);
        double acc = 0.0;
        for (std::size_t e = 0; e < m.num_elements(); ++e) acc += values_[e] * m.element_measure(e);
        return acc;
    }

private:
    void check_size(const Mesh& m) const {
        if (values_.size() != m.num_elements())
            throw ConfigError("h.piecewise: expected " + std::to_string(m.num_elements()) + " element values");
    }
    double constant_ = 0.0;
    std::vector<double> values_;
};

namespace detail {

using Local = Eigen::Matrix<double, 6, 6>;
using RefTri = std::array<std::array<double, 2>, 3>;

enum class PairKind { Identical = 0, Vertex = 1, Edge = 2, Separated = 3 };

struct PairGeom {
    int dim = 1;
    std::array<Point, 3> ev, fv;
    std::array<int, 3> eslot{0, 1, 2}, fslot{0, 0, 0};
    int nslots = 0;
    PairKind kind = PairKind::Separated;
    std::array<int, 2> shared_e{-1, -1}, shared_f{-1, -1};
    double area_e = 0.0, area_f = 0.0;
    double dist = 0.0;
};

// int_0^1 t^{k0} (c0 + c1 t + c2 t^2) K(t L) dt through the radial moments.
inline double radial_profile(const Kernel& K, double L, int k0, std::array<double, 3> c) {
    double acc = 0.0;
    for (int j = 0; j < 3; ++j) {
        if (c[j] == 0.0) continue;
        const int k = k0 + j;
        acc += c[j] * std::pow(L, -(k + 1)) * K.moment(k, L);
    }
    return acc;
}

// A face point of a pyramid in parameter space: coordinates and weight.
struct FacePoint {
    std::array<double, 4> p;
    double w;
};

inline std::vector<FacePoint> segment_face(int n, std::function<std::array<double, 4>(double)> f) {
    const auto& g = quad::gauss_legendre(n);
    std::vector<FacePoint> out;
    for (std::size_t i = 0; i < g.size(); ++i) out.push_back({f(g.x[i]), g.w[i]});
    return out;
}

inline std::vector<FacePoint> square_face(int n, std::function<std::array<double, 4>(double, double)> f) {
    const auto& g = quad::gauss_legendre(n);
    std::vector<FacePoint> out;
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j) out.push_back({f(g.x[i], g.x[j]), g.w[i] * g.w[j]});
    return out;
}

inline std::vector<FacePoint> triangle_face(int n, std::function<std::array<double, 4>(double, double)> f) {
    const auto& r = quad::triangle_rule(n);
    std::vector<FacePoint> out;
    for (std::size_t i = 0; i < r.size(); ++i) out.push_back({f(r.x[i][0], r.x[i][1]), r.w[i]});
    return out;
}

inline std::vector<FacePoint> prism_face(int n, std::function<std::array<double, 4>(double, double, double)> f) {
    const auto& g = quad::gauss_legendre(n);
    const auto& r = quad::triangle_rule(n);
    std::vector<FacePoint> out;
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < r.size(); ++j)
            out.push_back({f(g.x[i], r.x[j][0], r.x[j][1]), g.w[i] * r.w[j]});
    return out;
}

// Integral over a union of pyramids with apex at the singular point of the
// parameter space. Difference functions are linear in the parameters
// (rows of `coef`), the physical offset x - y is `offset(p)`, and the radial
// factor after integrating t out is `radial(|x - y|)`.
struct PyramidProblem {
    int nparams = 0;
    std::vector<std::array<double, 4>> coef;  // one per slot
    std::function<Point(const std::array<double, 4>&)> offset;
    std::function<double(double)> radial;
    std::function<std::vector<FacePoint>(int)> faces;  // face points at given order
    double factor = 1.0;
};

inline Local integrate_pyramids(const PyramidProblem& pb, int order) {
    Local L = Local::Zero();
    const int ns = static_cast<int>(pb.coef.size());
    for (const auto& fp : pb.faces(order)) {
        std::array<double, 6> d{};
        for (int a = 0; a < ns; ++a) {
            double v = 0.0;
            for (int k = 0; k < pb.nparams; ++k) v += pb.coef[a][k] * fp.p[k];
            d[a] = v;
        }
        const double r = pb.offset(fp.p).norm();
        const double w = fp.w * pb.radial(r);
        for (int a = 0; a < ns; ++a)
            for (int b = 0; b < ns; ++b) L(a, b) += w * d[a] * d[b];
    }
    return pb.factor * L;
}

inline double max_abs(const Local& L) { return L.cwiseAbs().maxCoeff(); }

// Raises the face order until two consecutive orders agree.
inline Local integrate_pyramids_checked(const PyramidProblem& pb, int base, const std::string& what) {
    const std::array<int, 4> orders{base, base + 8, base + 16, base + 32};
    Local prev = integrate_pyramids(pb, orders[0]);
    double rel = kInf;
    for (std::size_t i = 1; i < orders.size(); ++i) {
        Local cur = integrate_pyramids(pb, orders[i]);
        const double scale = std::max(max_abs(cur), 1e-300);
        rel = max_abs(cur - prev) / scale;
        if (rel <= 1e-10) return cur;
        prev = cur;
    }
    if (rel > 1e-6) throw AssemblyError("assembly: singular quadrature did not converge for " + what);
    return prev;
}

inline std::array<double, 4> P(double a, double b = 0, double c = 0, double d = 0) { return {a, b, c, d}; }

inline Local touching_local(const PairGeom& g, const Kernel& K, const std::string& what) {
    PyramidProblem pb;
    std::vector<std::array<double, 4>> coef(g.nslots, P(0));
    if (g.kind == PairKind::Identical) {
        if (g.dim == 1) {
            const double h = g.ev[1][0] - g.ev[0][0];
            pb.nparams = 1;
            coef[0] = P(-1);
            coef[1] = P(1);
            pb.offset = [h](const std::array<double, 4>& p) { return Point(p[0] * h); };
            pb.radial = [&K](double L) { return radial_profile(K, L, 2, {1.0, -1.0, 0.0}); };
            pb.faces = [](int) { return std::vector<FacePoint>{{P(1), 1.0}, {P(-1), 1.0}}; };
            pb.factor = h * h;
        } else {
            const Point E1 = g.ev[1] - g.ev[0], E2 = g.ev[2] - g.ev[0];
            pb.nparams = 2;
            coef[0] = P(-1, -1);
            coef[1] = P(1, 0);
            coef[2] = P(0, 1);
            pb.offset = [E1, E2](const std::array<double, 4>& p) { return p[0] * E1 + p[1] * E2; };
            pb.radial = [&K](double L) { return 0.5 * radial_profile(K, L, 3, {1.0, -2.0, 1.0}); };
            pb.faces = [](int n) {
                // hexagon S - S, vertices in angular order
                const std::array<std::array<double, 2>, 6> v{{{1, 0}, {0, 1}, {-1, 1}, {-1, 0}, {0, -1}, {1, -1}}};
                std::vector<FacePoint> out;
                for (int k = 0; k < 6; ++k) {
                    const auto a = v[k], b = v[(k + 1) % 6];
                    auto pts = segment_face(n, [a, b](double s) {
                        return P(a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]));
                    });
                    out.insert(out.end(), pts.begin(), pts.end());
                }
                return out;
            };
            pb.factor = (2.0 * g.area_e) * (2.0 * g.area_e);
        }
    } else if (g.kind == PairKind::Vertex) {
        const int ie = g.shared_e[0], jf = g.shared_f[0];
        const Point Pv = g.ev[ie];
        std::array<int, 2> eo{}, fo{};
        for (int k = 0, c = 0; k <= g.dim; ++k)
            if (k != ie) eo[c++] = k;
        for (int k = 0, c = 0; k <= g.dim; ++k)
            if (k != jf) fo[c++] = k;
        if (g.dim == 1) {
            const Point E = g.ev[eo[0]] - Pv, F = g.fv[fo[0]] - Pv;
            pb.nparams = 2;
            coef[g.eslot[ie]] = P(-1, 1);
            coef[g.eslot[eo[0]]] = P(1, 0);
            coef[g.fslot[fo[0]]] = P(0, -1);
            pb.offset = [E, F](const std::array<double, 4>& p) { return p[0] * E - p[1] * F; };
            pb.radial = [&K](double L) { return radial_profile(K, L, 3, {1.0, 0.0, 0.0}); };
            pb.faces = [](int n) {
                auto a = segment_face(n, [](double s) { return P(1, s); });
                auto b = segment_face(n, [](double s) { return P(s, 1); });
                a.insert(a.end(), b.begin(), b.end());
                return a;
            };
            pb.factor = std::abs(E[0]) * std::abs(F[0]);
        } else {
            const Point E1 = g.ev[eo[0]] - Pv, E2 = g.ev[eo[1]] - Pv;
            const Point F1 = g.fv[fo[0]] - Pv, F2 = g.fv[fo[1]] - Pv;
            pb.nparams = 4;
            coef[g.eslot[ie]] = P(-1, -1, 1, 1);
            coef[g.eslot[eo[0]]] = P(1, 0, 0, 0);
            coef[g.eslot[eo[1]]] = P(0, 1, 0, 0);
            coef[g.fslot[fo[0]]] = P(0, 0, -1, 0);
            coef[g.fslot[fo[1]]] = P(0, 0, 0, -1);
            pb.offset = [=](const std::array<double, 4>& p) { return p[0] * E1 + p[1] * E2 - p[2] * F1 - p[3] * F2; };
            pb.radial = [&K](double L) { return radial_profile(K, L, 5, {1.0, 0.0, 0.0}); };
            pb.faces = [](int n) {
                auto a = prism_face(n, [](double al, double c, double d) { return P(al, 1 - al, c, d); });
                auto b = prism_face(n, [](double al, double c, double d) { return P(c, d, al, 1 - al); });
                a.insert(a.end(), b.begin(), b.end());
                return a;
            };
            pb.factor = (2.0 * g.area_e) * (2.0 * g.area_f);
        }
    } else {
        // common edge P-Q; params (z, b, d) with x = P + a E + b U1, y = P + c E + d U2, z = a - c
        const int i0 = g.shared_e[0], i1 = g.shared_e[1];
        const int j0 = g.shared_f[0], j1 = g.shared_f[1];
        const int i2 = 3 - i0 - i1, j2 = 3 - j0 - j1;
        const Point Pv = g.ev[i0];
        const Point E = g.ev[i1] - Pv, U1 = g.ev[i2] - Pv, U2 = g.fv[j2] - Pv;
        pb.nparams = 3;
        coef[g.eslot[i0]] = P(-1, -1, 1);
        coef[g.eslot[i1]] = P(1, 0, 0);
        coef[g.eslot[i2]] = P(0, 1, 0);
        coef[g.fslot[j2]] = P(0, 0, -1);
        (void)j0;
        (void)j1;
        pb.offset = [=](const std::array<double, 4>& p) { return p[0] * E + p[1] * U1 - p[2] * U2; };
        pb.radial = [&K](double L) { return radial_profile(K, L, 4, {1.0, -1.0, 0.0}); };
        pb.faces = [](int n) {
            auto out = square_face(n, [](double a, double d) { return P(a, 1 - a, d); });
            auto r2 = triangle_face(n, [](double z, double b) { return P(z, b, 1); });
            auto r3 = square_face(n, [](double a, double b) { return P(-a, b, 1 - a); });
            auto r4 = triangle_face(n, [](double z, double d) { return P(-z, 1, d); });
            for (auto* v : {&r2, &r3, &r4}) out.insert(out.end(), v->begin(), v->end());
            return out;
        };
        pb.factor = (2.0 * g.area_e) * (2.0 * g.area_f);
    }
    pb.coef = std::move(coef);
    return integrate_pyramids_checked(pb, g.dim == 1 ? 16 : 12, what);
}

// ---- separated pairs: tensor Gauss with adaptive subdivision ----

struct SubRule {
    std::vector<Point> x;
    std::vector<std::array<double, 3>> lam;  // barycentrics in the parent element
    std::vector<double> w;
};

inline SubRule sub_rule(int dim, const std::array<Point, 3>& v, double measure, const RefTri& r, int order) {
    SubRule out;
    if (dim == 1) {
        const auto& g = quad::gauss_legendre(order);
        const double t0 = r[0][0], t1 = r[1][0];
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double t = t0 + (t1 - t0) * g.x[i];
            out.x.push_back(v[0] + t * (v[1] - v[0]));
            out.lam.push_back({1.0 - t, t, 0.0});
            out.w.push_back(g.w[i] * (t1 - t0) * measure);
        }
        return out;
    }
    const auto& tr = quad::triangle_rule(order);
    const double det = std::abs((r[1][0] - r[0][0]) * (r[2][1] - r[0][1]) - (r[1][1] - r[0][1]) * (r[2][0] - r[0][0]));
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const double al = tr.x[i][0], be = tr.x[i][1];
        const double a = r[0][0] + al * (r[1][0] - r[0][0]) + be * (r[2][0] - r[0][0]);
        const double b = r[0][1] + al * (r[1][1] - r[0][1]) + be * (r[2][1] - r[0][1]);
        out.x.push_back(v[0] + a * (v[1] - v[0]) + b * (v[2] - v[0]));
        out.lam.push_back({1.0 - a - b, a, b});
        out.w.push_back(tr.w[i] * det * 2.0 * measure);
    }
    return out;
}

inline std::vector<RefTri> children(int dim, const RefTri& r) {
    if (dim == 1) {
        const double m = 0.5 * (r[0][0] + r[1][0]);
        return {RefTri{{{r[0][0], 0}, {m, 0}, {0, 0}}}, RefTri{{{m, 0}, {r[1][0], 0}, {0, 0}}}};
    }
    auto mid = [](const std::array<double, 2>& a, const std::array<double, 2>& b) {
        return std::array<double, 2>{0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])};
    };
    const auto m01 = mid(r[0], r[1]), m12 = mid(r[1], r[2]), m20 = mid(r[2], r[0]);
    return {RefTri{{r[0], m01, m20}}, RefTri{{m01, r[1], m12}}, RefTri{{m20, m12, r[2]}}, RefTri{{m12, m20, m01}}};
}

inline Local separated_rule(const PairGeom& g, const Kernel& K, const RefTri& re, const RefTri& rf, int order) {
    const SubRule se = sub_rule(g.dim, g.ev, g.area_e, re, order);
    const SubRule sf = sub_rule(g.dim, g.fv, g.area_f, rf, order);
    Local L = Local::Zero();
    const int nv = g.dim + 1;
    for (std::size_t i = 0; i < se.x.size(); ++i) {
        for (std::size_t j = 0; j < sf.x.size(); ++j) {
            std::array<double, 6> d{};
            for (int k = 0; k < nv; ++k) d[g.eslot[k]] += se.lam[i][k];
            for (int k = 0; k < nv; ++k) d[g.fslot[k]] -= sf.lam[j][k];
            const double w = se.w[i] * sf.w[j] * K.evaluate(se.x[i] - sf.x[j]);
            for (int a = 0; a < g.nslots; ++a)
                for (int b = 0; b < g.nslots; ++b) L(a, b) += w * d[a] * d[b];
        }
    }
    return L;
}

inline Point ref_to_phys(int dim, const std::array<Point, 3>& v, const std::array<double, 2>& r) {
    if (dim == 1) return v[0] + r[0] * (v[1] - v[0]);
    return v[0] + r[0] * (v[1] - v[0]) + r[1] * (v[2] - v[0]);
}

inline double element_distance(int dim, const std::array<Point, 3>& a, const std::array<Point, 3>& b);

inline double simplex_diameter(int dim, const std::array<Point, 3>& v) {
    double d = 0.0;
    for (int i = 0; i <= dim; ++i)
        for (int j = i + 1; j <= dim; ++j) d = std::max(d, (v[i] - v[j]).norm());
    return d;
}

// Recursive subdivision driven by separation: a sub-pair at least two
// diameters apart gets a single tensor rule; closer sub-pairs are split.
// At the depth limit the rule is compared with a higher order one.
inline Local separated_adaptive(const PairGeom& g, const Kernel& K, const RefTri& re, const RefTri& rf, int order,
                                int depth, const std::string& what) {
    std::array<Point, 3> pe{}, pf{};
    for (int k = 0; k <= g.dim; ++k) {
        pe[k] = ref_to_phys(g.dim, g.ev, re[k]);
        pf[k] = ref_to_phys(g.dim, g.fv, rf[k]);
    }
    const double diam = std::max(simplex_diameter(g.dim, pe), simplex_diameter(g.dim, pf));
    const double dist = element_distance(g.dim, pe, pf);
    if (dist >= 2.0 * diam) return separated_rule(g, K, re, rf, order);
    if (depth >= 8) {
        const Local lo = separated_rule(g, K, re, rf, order);
        const Local hi = separated_rule(g, K, re, rf, order + 6);
        const double rel = max_abs(hi - lo) / std::max(max_abs(hi), 1e-300);
        if (rel > 1e-6)
            throw AssemblyError("assembly: quadrature did not converge for " + what + " (estimated relative error " +
                                std::to_string(rel) + ")");
        return hi;
    }
    Local acc = Local::Zero();
    for (const auto& a : children(g.dim, re))
        for (const auto& b : children(g.dim, rf)) acc += separated_adaptive(g, K, a, b, order, depth + 1, what);
    return acc;
}

inline double point_segment_distance(const Point& p, const Point& a, const Point& b) {
    const Point ab = b - a;
    const double t = std::clamp((p - a).dot(ab) / ab.dot(ab), 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

inline double element_distance(int dim, const std::array<Point, 3>& a, const std::array<Point, 3>& b) {
    if (dim == 1) {
        const double a0 = std::min(a[0][0], a[1][0]), a1 = std::max(a[0][0], a[1][0]);
        const double b0 = std::min(b[0][0], b[1][0]), b1 = std::max(b[0][0], b[1][0]);
        return std::max({b0 - a1, a0 - b1, 0.0});
    }
    double d = kInf;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            d = std::min(d, point_segment_distance(a[i], b[j], b[(j + 1) % 3]));
            d = std::min(d, point_segment_distance(b[i], a[j], a[(j + 1) % 3]));
        }
    return d;
}

inline Local pair_local(const PairGeom& g, const Kernel& K, int order, const std::string& what) {
    if (g.kind != PairKind::Separated) return touching_local(g, K, what);
    const RefTri whole = g.dim == 1 ? RefTri{{{0, 0}, {1, 0}, {0, 0}}} : RefTri{{{0, 0}, {1, 0}, {0, 1}}};
    return separated_adaptive(g, K, whole, whole, order, 0, what);
}

inline PairGeom make_pair(const Mesh& m, std::size_t e, std::size_t f) {
    PairGeom g;
    g.dim = m.dim;
    const int nv = m.dim + 1;
    for (int k = 0; k < nv; ++k) {
        g.ev[k] = m.vertex(e, k);
        g.fv[k] = m.vertex(f, k);
    }
    g.area_e = std::abs(m.element_measure(e));
    g.area_f = std::abs(m.element_measure(f));
    for (int k = 0; k < nv; ++k) g.eslot[k] = k;
    int next = nv, shared = 0;
    for (int j = 0; j < nv; ++j) {
        int match = -1;
        for (int k = 0; k < nv; ++k)
            if (m.elements[f][j] == m.elements[e][k]) match = k;
        if (match >= 0) {
            g.fslot[j] = match;
            if (shared < 2) {
                g.shared_e[shared] = match;
                g.shared_f[shared] = j;
            }
            ++shared;
        } else {
            g.fslot[j] = next++;
        }
    }
    g.nslots = next;
    if (e == f)
        g.kind = PairKind::Identical;
    else if (shared == 0)
        g.kind = PairKind::Separated;
    else if (shared == 1)
        g.kind = PairKind::Vertex;
    else
        g.kind = PairKind::Edge;
    g.dist = g.kind == PairKind::Separated ? element_distance(g.dim, g.ev, g.fv) : 0.0;
    return g;
}

struct ClassKey {
    std::array<std::int64_t, 13> v{};
    bool operator==(const ClassKey& o) const { return v == o.v; }
};

struct ClassKeyHash {
    std::size_t operator()(const ClassKey& k) const {
        std::size_t h = 1469598103934665603ull;
        for (auto x : k.v) h = (h ^ static_cast<std::size_t>(x)) * 1099511628211ull;
        return h;
    }
};

inline ClassKey class_key(const PairGeom& g, double quantum) {
    ClassKey key;
    key.v[0] = static_cast<std::int64_t>(g.kind) * 16 + g.nslots;
    const Point o = g.ev[0];
    int idx = 1;
    for (int k = 0; k <= g.dim; ++k) {
        const Point a = g.ev[k] - o, b = g.fv[k] - o;
        key.v[idx++] = std::llround(a[0] / quantum);
        key.v[idx++] = std::llround(a[1] / quantum);
        key.v[idx++] = std::llround(b[0] / quantum);
        key.v[idx++] = std::llround(b[1] / quantum);
    }
    return key;
}

// 2 int_e phi_a phi_b k(x) dx for the vertices of element e, with rules
// graded toward boundary vertices/edges where k is unbounded.
inline Eigen::Matrix3d exterior_local(const Mesh& m, const Kernel& K, std::size_t e, int order) {
    Eigen::Matrix3d L = Eigen::Matrix3d::Zero();
    const int nv = m.dim + 1;
    auto accumulate = [&](const Point& x, const std::array<double, 3>& lam, double w) {
        if (m.domain.boundary_distance(x) <= 0.0) return;
        const double k = exterior_weight_raw(K, m.domain, x, Route::ClosedForm);
        for (int a = 0; a < nv; ++a)
            for (int b = 0; b < nv; ++b) L(a, b) += 2.0 * w * k * lam[a] * lam[b];
    };
    std::array<bool, 3> bnd{false, false, false};
    int nb = 0;
    for (int k = 0; k < nv; ++k) {
        bnd[k] = m.dof_of_node[m.elements[e][k]] < 0;
        nb += bnd[k];
    }
    const double meas = std::abs(m.element_measure(e));
    const int reg = std::max(order, 8);
    const auto graded = quad::graded_toward_zero(12, 0.15, 4, 12);
    if (m.dim == 1) {
        if (nb == 0) {
            const auto& g = quad::gauss_legendre(reg);
            for (std::size_t i = 0; i < g.size(); ++i)
                accumulate(m.map(e, g.x[i]), m.shape(g.x[i]), g.w[i] * meas);
        } else {
            const bool left = bnd[0];
            for (std::size_t i = 0; i < graded.size(); ++i) {
                const double t = left ? graded.x[i] : 1.0 - graded.x[i];
                accumulate(m.map(e, t), m.shape(t), graded.w[i] * meas);
            }
        }
        return L;
    }
    // 2D: work in reference coordinates (a, b) of the element
    using R2 = std::array<double, 2>;
    const std::array<R2, 3> ref{{{0, 0}, {1, 0}, {0, 1}}};
    auto emit = [&](double a, double b, double w) {
        accumulate(m.map(e, a, b), m.shape(a, b), w);
    };
    auto toward_vertex = [&](R2 v0, R2 v1, R2 v2, double area_frac) {
        const auto& g = quad::gauss_legendre(reg);
        for (std::size_t i = 0; i < graded.size(); ++i)
            for (std::size_t j = 0; j < g.size(); ++j) {
                const double xi = graded.x[i], eta = g.x[j];
                const double a = v0[0] + xi * ((v1[0] - v0[0]) + eta * (v2[0] - v1[0]));
                const double b = v0[1] + xi * ((v1[1] - v0[1]) + eta * (v2[1] - v1[1]));
                emit(a, b, graded.w[i] * g.w[j] * xi * 2.0 * area_frac * meas);
            }
    };
    auto toward_edge = [&](R2 v0, R2 v1, R2 v2) {
        const auto& g = quad::gauss_legendre(reg);
        for (std::size_t i = 0; i < graded.size(); ++i)
            for (std::size_t j = 0; j < g.size(); ++j) {
                const double xi = graded.x[i], eta = g.x[j];
                const double a = v2[0] + (1 - xi) * ((v0[0] - v2[0]) + eta * (v1[0] - v0[0]));
                const double b = v2[1] + (1 - xi) * ((v0[1] - v2[1]) + eta * (v1[1] - v0[1]));
                emit(a, b, graded.w[i] * g.w[j] * (1 - xi) * 2.0 * meas);
            }
    };
    if (nb == 0) {
        const auto& tr = quad::triangle_rule(reg);
        for (std::size_t i = 0; i < tr.size(); ++i) emit(tr.x[i][0], tr.x[i][1], tr.w[i] * 2.0 * meas);
    } else if (nb == 1) {
        const int v = bnd[0] ? 0 : (bnd[1] ? 1 : 2);
        toward_vertex(ref[v], ref[(v + 1) % 3], ref[(v + 2) % 3], 1.0);
    } else if (nb == 2) {
        const int o = !bnd[0] ? 0 : (!bnd[1] ? 1 : 2);
        const int v0 = (o + 1) % 3, v1 = (o + 2) % 3;
        const Point mid = 0.5 * (m.vertex(e, v0) + m.vertex(e, v1));
        if (m.domain.boundary_distance(mid) <= 1e-12 * m.h_min) {
            toward_edge(ref[v0], ref[v1], ref[o]);
        } else {
            // two boundary vertices on different sides: split at the edge midpoint
            const R2 mr{0.5 * (ref[v0][0] + ref[v1][0]), 0.5 * (ref[v0][1] + ref[v1][1])};
            toward_vertex(ref[v0], mr, ref[o], 0.5);
            toward_vertex(ref[v1], ref[o], mr, 0.5);
        }
    }
    // nb == 3: no dofs on this element
    return L;
}

}  // namespace detail

/// Options for stiffness assembly.
struct AssemblyOptions {
    bool include_exterior = true;  // add the 2 int phi_i phi_j k term
};

/// Exact P1 mass matrix on the interior dofs.
inline Matrix assemble_mass(const Mesh& m) {
    const std::size_t d = m.num_dofs();
    Matrix M = Matrix::Zero(d, d);
    const int nv = m.dim + 1;
    for (std::size_t e = 0; e < m.num_elements(); ++e) {
        const double meas = std::abs(m.element_measure(e));
        const double diag = m.dim == 1 ? meas / 3.0 : meas / 6.0;
        const double off = m.dim == 1 ? meas / 6.0 : meas / 12.0;
        for (int a = 0; a < nv; ++a) {
            const int i = m.dof_of_node[m.elements[e][a]];
            if (i < 0) continue;
            for (int b = 0; b < nv; ++b) {
                const int j = m.dof_of_node[m.elements[e][b]];
                if (j < 0) continue;
                M(i, j) += a == b ? diag : off;
            }
        }
    }
    return M;
}

/// Assembles the Gagliardo stiffness matrix (and mass matrix).
///
/// Element pairs are classified as identical, vertex-sharing, edge-sharing,
/// or separated. Touching pairs are integrated by splitting the parameter
/// domain into pyramids with apex at the singular point and integrating the
/// apex direction analytically through radial kernel moments; separated pairs
/// use tensor Gauss rules, refined adaptively when the pair is close relative
/// to its size. Pair contributions are computed once per translation class
/// (in parallel) and accumulated in a fixed order, so A is bit-reproducible
/// for any worker count.
inline StiffnessSystem assemble_stiffness(const Mesh& m, const Kernel& K, int quadrature_order = 6,
                                          AssemblyOptions opts = {}) {
    if (K.dimension() != m.dim) throw ConfigError("assembly: kernel and mesh dimensions differ");
    if (quadrature_order < 1) throw ConfigError("quadrature_order: must be positive");
    const std::size_t d = m.num_dofs();
    if (d > 5000) throw ConfigError("assembly: more than 5000 dofs");
    const std::size_t ne = m.num_elements();
    const double quantum = 1e-9 * m.h_min;

    std::unordered_map<detail::ClassKey, int, detail::ClassKeyHash> index;
    std::vector<detail::PairGeom> reps;
    std::vector<std::pair<std::size_t, std::size_t>> rep_pairs;
    std::vector<std::int32_t> pair_class;
    pair_class.reserve(ne * (ne + 1) / 2);
    for (std::size_t e = 0; e < ne; ++e) {
        for (std::size_t f = e; f < ne; ++f) {
            if (!m.element_has_dof(e) && !m.element_has_dof(f)) {
                pair_class.push_back(-1);
                continue;
            }
            auto g = detail::make_pair(m, e, f);
            const auto key = detail::class_key(g, quantum);
            auto [it, inserted] = index.try_emplace(key, static_cast<int>(reps.size()));
            if (inserted) {
                reps.push_back(g);
                rep_pairs.emplace_back(e, f);
            }
            pair_class.push_back(it->second);
        }
    }

    std::vector<detail::Local> locals(reps.size());
    parallel_for(reps.size(), [&](std::size_t c) {
        const std::string what = "element pair (" + std::to_string(rep_pairs[c].first) + ", " +
                                 std::to_string(rep_pairs[c].second) + ")";
        locals[c] = detail::pair_local(reps[c], K, quadrature_order, what);
    });

    StiffnessSystem sys;
    sys.quadrature_order = quadrature_order;
    sys.pair_classes = reps.size();
    sys.A = Matrix::Zero(d, d);
    std::size_t p = 0;
    for (std::size_t e = 0; e < ne; ++e) {
        for (std::size_t f = e; f < ne; ++f, ++p) {
            const int c = pair_class[p];
            if (c < 0) continue;
            const auto& g = reps[c];
            const double mult = e == f ? 1.0 : 2.0;
            std::array<int, 6> dof;
            dof.fill(-1);
            for (int k = 0; k <= m.dim; ++k) {
                dof[g.eslot[k]] = m.dof_of_node[m.elements[e][k]];
                dof[g.fslot[k]] = m.dof_of_node[m.elements[f][k]];
            }
            const auto& L = locals[c];
            for (int a = 0; a < g.nslots; ++a) {
                if (dof[a] < 0) continue;
                for (int b = 0; b < g.nslots; ++b) {
                    if (dof[b] < 0) continue;
                    sys.A(dof[a], dof[b]) += mult * L(a, b);
                }
            }
        }
    }

    sys.exterior_diag = Vector::Zero(d);
    if (opts.include_exterior) {
        std::vector<Eigen::Matrix3d> ext(ne);
        parallel_for(ne, [&](std::size_t e) {
            ext[e] = m.element_has_dof(e) ? detail::exterior_local(m, K, e, quadrature_order)
                                          : Eigen::Matrix3d::Zero().eval();
        });
        for (std::size_t e = 0; e < ne; ++e) {
            for (int a = 0; a <= m.dim; ++a) {
                const int i = m.dof_of_node[m.elements[e][a]];
                if (i < 0) continue;
                for (int b = 0; b <= m.dim; ++b) {
                    const int j = m.dof_of_node[m.elements[e][b]];
                    if (j < 0) continue;
                    sys.A(i, j) += ext[e](a, b);
                    if (i == j) sys.exterior_diag[i] += ext[e](a, b);
                }
            }
        }
    }
    // exact symmetry
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) {
            const double v = 0.5 * (sys.A(i, j) + sys.A(j, i));
            sys.A(i, j) = sys.A(j, i) = v;
        }
    sys.M = assemble_mass(m);
    return sys;
}

namespace detail {

// Quadrature points of element e: physical point, local shape values, weight.
template <typename Fn>
void for_each_qp(const Mesh& m, std::size_t e, int order, Fn&& fn) {
    const double meas = std::abs(m.element_measure(e));
    if (m.dim == 1) {
        const auto& g = quad::gauss_legendre(order);
        for (std::size_t i = 0; i < g.size(); ++i) fn(m.shape(g.x[i]), g.w[i] * meas);
    } else {
        const auto& tr = quad::triangle_rule(order);
        for (std::size_t i = 0; i < tr.size(); ++i) fn(m.shape(tr.x[i][0], tr.x[i][1]), tr.w[i] * 2.0 * meas);
    }
}

}  // namespace detail

/// b_i = int_Omega h(x) g(u_h(x)) phi_i(x) dx by element Gauss quadrature.
inline Vector assemble_load(const Mesh& m, const HField& h, const std::function<double(double)>& g, const Vector& u,
                            int order = 6) {
    Vector b = Vector::Zero(m.num_dofs());
    for (std::size_t e = 0; e < m.num_elements(); ++e) {
        if (!m.element_has_dof(e)) continue;
        const double he = h.on_element(e);
        if (he < 0.0) throw DomainError("assemble_load: negative h on element " + std::to_string(e));
        const auto vals = m.local_values(e, u);
        detail::for_each_qp(m, e, order, [&](const std::array<double, 3>& lam, double w) {
            double uh = 0.0;
            for (int k = 0; k <= m.dim; ++k) uh += lam[k] * vals[k];
            const double gv = g(uh);
            for (int k = 0; k <= m.dim; ++k) {
                const int i = m.dof_of_node[m.elements[e][k]];
                if (i >= 0) b[i] += w * he * gv * lam[k];
            }
        });
    }
    return b;
}

/// int_Omega h(x) G(u_h(x)) dx with the same element rules as assemble_load.
inline double integrate_field(const Mesh& m, const HField& h, const std::function<double(double)>& G, const Vector& u,
                              int order = 6) {
    double acc = 0.0;
    for (std::size_t e = 0; e < m.num_elements(); ++e) {
        const double he = h.on_element(e);
        const auto vals = m.local_values(e, u);
        double part = 0.0;
        detail::for_each_qp(m, e, order, [&](const std::array<double, 3>& lam, double w) {
            double uh = 0.0;
            for (int k = 0; k <= m.dim; ++k) uh += lam[k] * vals[k];
            part += w * G(uh);
        });
        acc += he * part;
    }
    return acc;
}

}  // namespace fraclap
