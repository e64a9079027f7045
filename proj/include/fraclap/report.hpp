#pragma once

#include "fraclap/core.hpp"
#include "fraclap/hypotheses.hpp"
#include "fraclap/mesh.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace fraclap {

using ordered_json = nlohmann::ordered_json;

/// Where a reported number comes from.
enum class Provenance { Config, Measured, Derived };

inline const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::Config: return "config";
        case Provenance::Measured: return "measured";
        case Provenance::Derived: return "derived";
    }
    return "?";
}

/// JSON has no infinities or NaN; those are written as strings.
inline ordered_json json_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

/// {value, tolerance, provenance}.
inline ordered_json quantity(double value, double tolerance, Provenance prov) {
    ordered_json j;
    j["value"] = json_number(value);
    j["tolerance"] = json_number(std::isfinite(value) ? tolerance : 0.0);
    j["provenance"] = to_string(prov);
    return j;
}

inline ordered_json config_value(double v) { return quantity(v, 0.0, Provenance::Config); }

inline ordered_json check_json(const CheckResult& c, bool required, double tolerance = 0.0) {
    ordered_json j;
    j["verdict"] = to_string(c.verdict);
    j["required"] = required;
    j["value"] = quantity(c.value, tolerance, Provenance::Measured);
    j["threshold"] = quantity(c.threshold, tolerance, Provenance::Derived);
    j["detail"] = c.detail;
    return j;
}

inline ordered_json verdict_json(Verdict v, bool required, const std::string& detail = {}) {
    ordered_json j;
    j["verdict"] = to_string(v);
    j["required"] = required;
    j["detail"] = detail;
    return j;
}

namespace detail {

inline std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

/// Nodal values on every mesh node, boundary nodes carrying 0.
inline Vector nodal_values(const Mesh& m, const Vector& u) {
    Vector full = Vector::Zero(static_cast<Eigen::Index>(m.nodes.size()));
    for (std::size_t k = 0; k < m.nodes.size(); ++k)
        if (m.dof_of_node[k] >= 0) full[static_cast<Eigen::Index>(k)] = u[m.dof_of_node[k]];
    return full;
}

/// solution.csv: header then one row per node (x[, y], u).
inline void write_solution_csv(const std::filesystem::path& path, const Mesh& m, const Vector& full) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << (m.dim == 1 ? "x,u\n" : "x,y,u\n");
    for (std::size_t k = 0; k < m.nodes.size(); ++k) {
        out << detail::fmt17(m.nodes[k][0]) << ',';
        if (m.dim == 2) out << detail::fmt17(m.nodes[k][1]) << ',';
        out << detail::fmt17(full[static_cast<Eigen::Index>(k)]) << '\n';
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

/// plot.dat: whitespace columns, 1D sorted by x; 2D in node order with a
/// blank line whenever y changes (gnuplot's grid format for structured meshes).
inline void write_plot_dat(const std::filesystem::path& path, const Mesh& m, const Vector& full) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    std::vector<std::size_t> order(m.nodes.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    if (m.dim == 1)
        std::sort(order.begin(), order.end(), [&](auto i, auto j) { return m.nodes[i][0] < m.nodes[j][0]; });
    for (std::size_t idx = 0; idx < order.size(); ++idx) {
        const std::size_t k = order[idx];
        if (m.dim == 2 && idx > 0 && m.nodes[k][1] != m.nodes[order[idx - 1]][1]) out << '\n';
        out << detail::fmt17(m.nodes[k][0]) << ' ';
        if (m.dim == 2) out << detail::fmt17(m.nodes[k][1]) << ' ';
        out << detail::fmt17(full[static_cast<Eigen::Index>(k)]) << '\n';
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline void write_report(const std::filesystem::path& path, const ordered_json& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << report.dump(2) << '\n';
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace fraclap
