#pragma once

#include "fraclap/assembly.hpp"
#include "fraclap/config.hpp"
#include "fraclap/embedding.hpp"
#include "fraclap/hypotheses.hpp"
#include "fraclap/kernel.hpp"
#include "fraclap/mesh.hpp"
#include "fraclap/report.hpp"
#include "fraclap/solver.hpp"
#include "fraclap/spectral.hpp"

#include <sstream>

namespace fraclap {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitHypothesis = 2, kExitNumeric = 3 };

struct PipelineResult {
    int exit_code = kExitOk;
    std::string message;
    ordered_json report;
    std::optional<Mesh> mesh;
    Vector nodal;  // every mesh node, boundary nodes 0
    bool has_solution = false;
};

namespace detail {

inline Kernel make_kernel(const RunConfig& c) {
    if (c.kernel.type == "tabulated") {
        auto [r, v] = read_radial_table(c.kernel.table_path.string());
        return Kernel::tabulated(c.domain.dim, c.s, c.kernel.beta, std::move(r), std::move(v));
    }
    return Kernel::fractional(c.domain.dim, c.s, c.kernel.beta);
}

inline Mesh make_mesh(const RunConfig& c) {
    const auto& d = c.domain;
    return d.dim == 1 ? build_interval_mesh(d.x[0], d.x[1], d.nx) : build_rectangle_mesh(d.x, d.y, d.nx, d.ny);
}

// CSV rows "element_id,value"; a non-numeric first row is a header.
inline HField read_piecewise_h(const std::filesystem::path& path, const Mesh& m) {
    std::ifstream in(path);
    if (!in) throw ConfigError("h.piecewise: cannot open '" + path.string() + "'");
    std::vector<double> values(m.num_elements(), kNaN);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        for (auto& ch : line)
            if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
        std::istringstream ss(line);
        long id;
        double v;
        if (!(ss >> id >> v)) {
            if (first) {
                first = false;
                continue;
            }
            throw ConfigError("h.piecewise: malformed row '" + line + "'");
        }
        first = false;
        if (id < 0 || static_cast<std::size_t>(id) >= values.size())
            throw ConfigError("h.piecewise: element id " + std::to_string(id) + " out of range");
        if (!std::isnan(values[id])) throw ConfigError("h.piecewise: element id " + std::to_string(id) + " repeated");
        values[id] = v;
    }
    for (std::size_t e = 0; e < values.size(); ++e)
        if (std::isnan(values[e])) throw ConfigError("h.piecewise: no value for element " + std::to_string(e));
    return HField::piecewise(std::move(values));
}

inline Nonlinearity make_nonlinearity(const NonlinearitySpec& f) {
    if (!f.expr.empty()) return Nonlinearity::expression(f.expr, f.gamma);
    if (f.builtin == "power") return Nonlinearity::power(f.p, f.scale);
    return Nonlinearity::saturating(f.alpha);
}

inline ordered_json config_echo(const RunConfig& c) {
    ordered_json j;
    j["mode"] = to_string(c.mode);
    j["s"] = c.s;
    j["q"] = c.q;
    j["kernel"] = {{"type", c.kernel.type}, {"beta", c.kernel.beta}, {"samples", c.kernel.samples}};
    if (c.kernel.type == "tabulated") j["kernel"]["table_path"] = c.kernel.table_path.filename().string();
    if (c.domain.dim == 1)
        j["domain"] = {{"interval", c.domain.x}, {"cells", c.domain.nx}};
    else
        j["domain"] = {{"rectangle", {c.domain.x, c.domain.y}}, {"cells", {c.domain.nx, c.domain.ny}}};
    if (!c.f.expr.empty())
        j["f"] = {{"expr", c.f.expr}, {"gamma", c.f.gamma}};
    else
        j["f"] = {{"builtin", c.f.builtin}, {"alpha", c.f.alpha}, {"p", c.f.p}, {"scale", c.f.scale}};
    j["f"]["given"] = c.f_given;
    if (c.h.constant)
        j["h"] = {{"constant", *c.h.constant}};
    else
        j["h"] = {{"piecewise", c.h.piecewise.filename().string()}};
    j["psi"] = c.psi.expr.empty() ? ordered_json{{"default_q", true}} : ordered_json{{"expr", c.psi.expr}};
    j["a"] = json_number(c.a);
    j["b"] = json_number(c.b);
    j["r"] = c.r.value ? ordered_json{{"value", *c.r.value}} : ordered_json{{"search", true}};
    if (c.alpha) j["alpha"] = *c.alpha;
    j["solver"] = {{"max_iters", c.solver.max_iters},
                   {"grad_tol", c.solver.grad_tol},
                   {"starts", c.solver.starts},
                   {"seed", c.solver.seed}};
    j["quadrature_order"] = c.quadrature_order;
    j["eig_tol"] = c.eig_tol;
    j["cq_restarts"] = c.cq_restarts;
    j["cq_inflation"] = c.cq_inflation;
    j["seed"] = c.seed;
    j["unsafe"] = c.unsafe;
    return j;
}

// Verdicts in insertion order; tracks which required ones did not pass.
struct CheckTable {
    ordered_json json = ordered_json::object();
    std::vector<std::string> failing;

    void add(const CheckResult& c, bool required = true, double tolerance = 0.0) {
        json[c.label] = check_json(c, required, tolerance);
        note(c.label, c.verdict, required);
    }
    void add(const std::string& label, Verdict v, bool required, const std::string& detail = {}) {
        json[label] = verdict_json(v, required, detail);
        note(label, v, required);
    }
    bool all_pass() const { return failing.empty(); }

private:
    void note(const std::string& label, Verdict v, bool required) {
        if (required && v != Verdict::Pass) failing.push_back(label);
    }
};

inline std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
    return s;
}

}  // namespace detail

}  // namespace fraclap
