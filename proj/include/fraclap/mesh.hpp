#pragma once

#include "fraclap/core.hpp"

#include <algorithm>
#include <optional>
#include <vector>

namespace fraclap {

/// Axis-aligned domain: an interval (dim 1) or a rectangle (dim 2).
struct Domain {
    int dim = 1;
    double x0 = 0.0, x1 = 1.0;
    double y0 = 0.0, y1 = 0.0;

    double measure() const { return dim == 1 ? (x1 - x0) : (x1 - x0) * (y1 - y0); }

    /// Distance from x to the boundary; negative outside.
    double boundary_distance(const Point& p) const {
        double d = std::min(p[0] - x0, x1 - p[0]);
        if (dim == 2) d = std::min({d, p[1] - y0, y1 - p[1]});
        return d;
    }

    Point center() const { return dim == 1 ? Point(0.5 * (x0 + x1)) : Point(0.5 * (x0 + x1), 0.5 * (y0 + y1)); }
};

/// Conforming P1 mesh. Element vertices are stored in `elements[e][0..dim]`;
/// triangles are counter-clockwise. Only interior nodes carry degrees of
/// freedom, which encodes u = 0 outside the domain for zero-extended P1 functions.
struct Mesh {
    int dim = 1;
    Domain domain;
    std::vector<Point> nodes;
    std::vector<std::array<int, 3>> elements;
    std::vector<int> interior_dof;  // dof -> node
    std::vector<int> dof_of_node;   // node -> dof, or -1 on the boundary
    double h_max = 0.0;
    double h_min = 0.0;

    int vertices_per_element() const { return dim + 1; }
    std::size_t num_dofs() const { return interior_dof.size(); }
    std::size_t num_elements() const { return elements.size(); }

    Point vertex(std::size_t e, int k) const { return nodes[elements[e][k]]; }

    double element_measure(std::size_t e) const {
        if (dim == 1) return vertex(e, 1)[0] - vertex(e, 0)[0];
        return 0.5 * cross(vertex(e, 1) - vertex(e, 0), vertex(e, 2) - vertex(e, 0));
    }

    double element_diameter(std::size_t e) const {
        if (dim == 1) return element_measure(e);
        const Point a = vertex(e, 0), b = vertex(e, 1), c = vertex(e, 2);
        return std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
    }

    /// Maps reference coordinates (1D: t in [0,1]; 2D: (a,b) in the reference
    /// triangle) to physical space.
    Point map(std::size_t e, double a, double b = 0.0) const {
        const Point v0 = vertex(e, 0);
        if (dim == 1) return v0 + a * (vertex(e, 1) - v0);
        return v0 + a * (vertex(e, 1) - v0) + b * (vertex(e, 2) - v0);
    }

    /// Values of the element's local basis functions at reference coordinates.
    std::array<double, 3> shape(double a, double b = 0.0) const {
        if (dim == 1) return {1.0 - a, a, 0.0};
        return {1.0 - a - b, a, b};
    }

    /// Barycentric coordinates of p with respect to element e.
    std::array<double, 3> barycentric(std::size_t e, const Point& p) const {
        if (dim == 1) {
            const double t = (p[0] - vertex(e, 0)[0]) / element_measure(e);
            return {1.0 - t, t, 0.0};
        }
        const Point v0 = vertex(e, 0);
        const Point e1 = vertex(e, 1) - v0, e2 = vertex(e, 2) - v0, d = p - v0;
        const double det = cross(e1, e2);
        const double a = cross(d, e2) / det;
        const double b = cross(e1, d) / det;
        return {1.0 - a - b, a, b};
    }

    /// Element containing p (first match), or nullopt.
    std::optional<std::size_t> locate(const Point& p, double tol = 1e-12) const {
        for (std::size_t e = 0; e < elements.size(); ++e) {
            const auto l = barycentric(e, p);
            bool inside = true;
            for (int k = 0; k <= dim; ++k) inside = inside && l[k] >= -tol;
            if (inside) return e;
        }
        return std::nullopt;
    }

    /// Nodal basis function of `node` evaluated at p (zero outside the domain).
    double basis(int node, const Point& p) const {
        const auto e = locate(p);
        if (!e) return 0.0;
        const auto l = barycentric(*e, p);
        for (int k = 0; k <= dim; ++k)
            if (elements[*e][k] == node) return l[k];
        return 0.0;
    }

    /// P1 interpolant of dof coefficients at p.
    double interpolate(const Vector& u, const Point& p) const {
        const auto e = locate(p);
        if (!e) return 0.0;
        const auto l = barycentric(*e, p);
        double v = 0.0;
        for (int k = 0; k <= dim; ++k) {
            const int dof = dof_of_node[elements[*e][k]];
            if (dof >= 0) v += l[k] * u[dof];
        }
        return v;
    }

    /// Coefficients of element e's vertices (zero for boundary nodes).
    std::array<double, 3> local_values(std::size_t e, const Vector& u) const {
        std::array<double, 3> v{0.0, 0.0, 0.0};
        for (int k = 0; k <= dim; ++k) {
            const int dof = dof_of_node[elements[e][k]];
            if (dof >= 0) v[k] = u[dof];
        }
        return v;
    }

    bool element_has_dof(std::size_t e) const {
        for (int k = 0; k <= dim; ++k)
            if (dof_of_node[elements[e][k]] >= 0) return true;
        return false;
    }
};

namespace detail {

inline void finalize_mesh(Mesh& m, const std::vector<bool>& on_boundary) {
    m.dof_of_node.assign(m.nodes.size(), -1);
    m.interior_dof.clear();
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
        if (!on_boundary[i]) {
            m.dof_of_node[i] = static_cast<int>(m.interior_dof.size());
            m.interior_dof.push_back(static_cast<int>(i));
        }
    }
    m.h_max = 0.0;
    m.h_min = kInf;
    for (std::size_t e = 0; e < m.elements.size(); ++e) {
        if (!(m.element_measure(e) > 0.0)) throw ConfigError("mesh: element with non-positive measure");
        const double h = m.element_diameter(e);
        m.h_max = std::max(m.h_max, h);
        m.h_min = std::min(m.h_min, h);
    }
    if (m.h_max / m.h_min > 10.0) throw ConfigError("mesh: h_max/h_min exceeds 10");
}

}  // namespace detail

/// Uniform mesh of (a, b) with `cells` segments and cells-1 interior dofs.
inline Mesh build_interval_mesh(double a, double b, int cells) {
    if (!(a < b)) throw ConfigError("domain.interval: need a < b");
    if (cells < 2) throw ConfigError("domain.cells: need at least 2 cells");
    Mesh m;
    m.dim = 1;
    m.domain = Domain{1, a, b, 0.0, 0.0};
    const double h = (b - a) / cells;
    std::vector<bool> bnd(cells + 1, false);
    for (int i = 0; i <= cells; ++i) m.nodes.emplace_back(i == cells ? b : a + i * h);
    bnd.front() = bnd.back() = true;
    for (int i = 0; i < cells; ++i) m.elements.push_back({i, i + 1, -1});
    detail::finalize_mesh(m, bnd);
    return m;
}

/// Structured triangulation of [x0,x1] x [y0,y1] with alternating diagonals
/// (each grid square split in two, diagonal direction flipping in a
/// checkerboard pattern). Interior dofs are the strict-interior grid nodes.
inline Mesh build_rectangle_mesh(std::array<double, 2> xr, std::array<double, 2> yr, int nx, int ny) {
    if (!(xr[0] < xr[1]) || !(yr[0] < yr[1])) throw ConfigError("domain.rectangle: degenerate range");
    if (nx < 2 || ny < 2) throw ConfigError("domain.cells: need at least 2 cells per direction");
    Mesh m;
    m.dim = 2;
    m.domain = Domain{2, xr[0], xr[1], yr[0], yr[1]};
    const double hx = (xr[1] - xr[0]) / nx, hy = (yr[1] - yr[0]) / ny;
    auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
    std::vector<bool> bnd;
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            const double x = i == nx ? xr[1] : xr[0] + i * hx;
            const double y = j == ny ? yr[1] : yr[0] + j * hy;
            m.nodes.emplace_back(x, y);
            bnd.push_back(i == 0 || j == 0 || i == nx || j == ny);
        }
    }
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
            if ((i + j) % 2 == 0) {
                m.elements.push_back({a, b, c});
                m.elements.push_back({a, c, d});
            } else {
                m.elements.push_back({a, b, d});
                m.elements.push_back({b, c, d});
            }
        }
    }
    detail::finalize_mesh(m, bnd);
    return m;
}

}  // namespace fraclap
