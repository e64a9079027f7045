#pragma once

#include "fraclap/core.hpp"
#include "fraclap/solver.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>

namespace fraclap {

/// Which existence statement a run exercises.
///
/// level: general f and psi, level r in (alpha, beta), condition (F).
/// truncated: f truncated at 0, psi = |t|^q, level r = xi0^q from (h3).
/// constant_weight: h constant, threshold on the weight, then the truncated path.
/// saturating_example: f = alpha t / (1 + t^2), h = 1, q = 2, truncated path.
/// checks_only: the truncated-path hypotheses without solving.
enum class Mode { Level, Truncated, ConstantWeight, SaturatingExample, ChecksOnly };

inline const char* to_string(Mode m) {
    switch (m) {
        case Mode::Level: return "level";
        case Mode::Truncated: return "truncated";
        case Mode::ConstantWeight: return "constant_weight";
        case Mode::SaturatingExample: return "saturating_example";
        case Mode::ChecksOnly: return "checks_only";
    }
    return "?";
}

struct KernelSpec {
    std::string type = "fractional";
    double beta = 1.0;
    std::filesystem::path table_path;
    int samples = 2000;
};

struct DomainSpec {
    int dim = 1;
    std::array<double, 2> x{0.0, 1.0};
    std::array<double, 2> y{0.0, 1.0};
    int nx = 64;
    int ny = 0;
};

struct NonlinearitySpec {
    std::string builtin = "saturating";  // saturating | power; empty when expr is set
    double alpha = 1.0;
    double p = 2.0;
    double scale = 1.0;
    std::string expr;
    double gamma = 1.0;
};

struct HSpec {
    std::optional<double> constant = 1.0;
    std::filesystem::path piecewise;  // CSV rows: element_id, value
};

struct PsiSpec {
    std::string expr;  // empty selects |t|^q
};

struct RSpec {
    std::optional<double> value;  // unset selects the search
};

/// One run, fully resolved. Relative paths are resolved against the config file directory.
struct RunConfig {
    Mode mode = Mode::Truncated;
    KernelSpec kernel;
    DomainSpec domain;
    double s = 0.5;
    double q = 2.0;
    NonlinearitySpec f;
    bool f_given = false;
    HSpec h;
    PsiSpec psi;
    double a = 0.0;
    double b = kInf;
    RSpec r;
    std::optional<double> alpha;
    SolverOptions solver;
    int quadrature_order = 6;
    double eig_tol = 1e-10;
    int cq_restarts = 32;
    double cq_inflation = 1.10;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "fraclap_out";
    bool unsafe = false;
};

namespace detail {

using json = nlohmann::json;

inline void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        if (!ok.count(k)) throw ConfigError((where.empty() ? k : where + "." + k) + ": unknown key");
}

template <class T>
T read(const json& j, const std::string& key, const std::string& path) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(path + ": " + (j.contains(key) ? "wrong type" : "missing required key"));
    }
}

template <class T>
T read_or(const json& j, const std::string& key, const std::string& path, T fallback) {
    return j.contains(key) ? read<T>(j, key, path) : fallback;
}

// numbers, or the strings "inf" / "+inf"
inline double read_extended(const json& j, const std::string& key, const std::string& path, double fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    const json& v = j.at(key);
    if (v.is_number()) return v.get<double>();
    if (v.is_string() && (v == "inf" || v == "+inf")) return kInf;
    throw ConfigError(path + ": expected a number or \"inf\"");
}

inline Mode parse_mode(const std::string& m) {
    if (m == "level") return Mode::Level;
    if (m == "truncated") return Mode::Truncated;
    if (m == "constant_weight") return Mode::ConstantWeight;
    if (m == "saturating_example") return Mode::SaturatingExample;
    if (m == "checks_only") return Mode::ChecksOnly;
    throw ConfigError("mode: unknown value '" + m + "'");
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

}  // namespace detail

/// Parses and validates a configuration object.
inline RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = ".") {
    using detail::read;
    using detail::read_or;
    detail::only_keys(j, "", {"mode", "kernel", "domain", "s", "q", "f", "h", "psi", "a", "b", "r", "alpha",
                              "solver", "quadrature_order", "eig_tol", "cq_restarts", "cq_inflation", "seed",
                              "output_dir", "unsafe"});
    RunConfig c;
    c.mode = detail::parse_mode(read_or<std::string>(j, "mode", "mode", "truncated"));
    c.s = read<double>(j, "s", "s");
    if (!(c.s > 0.0 && c.s < 1.0)) throw ConfigError("s: must lie in (0, 1)");
    c.q = read_or<double>(j, "q", "q", 2.0);
    if (!(c.q >= 1.0)) throw ConfigError("q: must be at least 1");

    if (j.contains("kernel")) {
        const auto& k = j.at("kernel");
        detail::only_keys(k, "kernel", {"type", "beta", "table_path", "samples"});
        c.kernel.type = read_or<std::string>(k, "type", "kernel.type", "fractional");
        c.kernel.beta = read_or<double>(k, "beta", "kernel.beta", 1.0);
        c.kernel.samples = read_or<int>(k, "samples", "kernel.samples", 2000);
        if (c.kernel.type == "tabulated")
            c.kernel.table_path = detail::resolve(base_dir, read<std::string>(k, "table_path", "kernel.table_path"));
        else if (c.kernel.type != "fractional")
            throw ConfigError("kernel.type: expected \"fractional\" or \"tabulated\"");
    }

    if (j.contains("domain")) {
        const auto& d = j.at("domain");
        detail::only_keys(d, "domain", {"interval", "rectangle", "cells"});
        if (d.contains("interval")) {
            c.domain.dim = 1;
            c.domain.x = read<std::array<double, 2>>(d, "interval", "domain.interval");
            c.domain.nx = read<int>(d, "cells", "domain.cells");
        } else if (d.contains("rectangle")) {
            c.domain.dim = 2;
            const auto rect = read<std::array<std::array<double, 2>, 2>>(d, "rectangle", "domain.rectangle");
            c.domain.x = rect[0];
            c.domain.y = rect[1];
            const auto cells = read<std::array<int, 2>>(d, "cells", "domain.cells");
            c.domain.nx = cells[0];
            c.domain.ny = cells[1];
        } else {
            throw ConfigError("domain: expected \"interval\" or \"rectangle\"");
        }
    }

    if (j.contains("f")) {
        const auto& f = j.at("f");
        detail::only_keys(f, "f", {"builtin", "alpha", "p", "scale", "expr", "gamma"});
        c.f_given = true;
        if (f.contains("expr")) {
            c.f.builtin.clear();
            c.f.expr = read<std::string>(f, "expr", "f.expr");
            c.f.gamma = read_or<double>(f, "gamma", "f.gamma", 1.0);
        } else {
            c.f.builtin = read<std::string>(f, "builtin", "f.builtin");
            if (c.f.builtin != "saturating" && c.f.builtin != "power")
                throw ConfigError("f.builtin: expected \"saturating\" or \"power\"");
            c.f.alpha = read_or<double>(f, "alpha", "f.alpha", 1.0);
            c.f.p = read_or<double>(f, "p", "f.p", 2.0);
            c.f.scale = read_or<double>(f, "scale", "f.scale", 1.0);
        }
    }

    if (j.contains("h")) {
        const auto& h = j.at("h");
        detail::only_keys(h, "h", {"constant", "piecewise"});
        if (h.contains("piecewise")) {
            c.h.constant.reset();
            c.h.piecewise = detail::resolve(base_dir, read<std::string>(h, "piecewise", "h.piecewise"));
        } else {
            c.h.constant = read<double>(h, "constant", "h.constant");
        }
    }

    if (j.contains("psi")) {
        const auto& p = j.at("psi");
        detail::only_keys(p, "psi", {"default_q", "expr"});
        if (p.contains("expr")) c.psi.expr = read<std::string>(p, "expr", "psi.expr");
    }

    c.a = detail::read_extended(j, "a", "a", 0.0);
    c.b = detail::read_extended(j, "b", "b", kInf);
    if (!(c.a >= 0.0 && c.a < c.b)) throw ConfigError("a, b: need 0 <= a < b");

    if (j.contains("r")) {
        const auto& r = j.at("r");
        detail::only_keys(r, "r", {"value", "search"});
        if (r.contains("value")) c.r.value = read<double>(r, "value", "r.value");
    }
    if (j.contains("alpha")) c.alpha = read<double>(j, "alpha", "alpha");

    if (j.contains("solver")) {
        const auto& sv = j.at("solver");
        detail::only_keys(sv, "solver", {"max_iters", "grad_tol", "starts", "seed"});
        c.solver.max_iters = read_or<int>(sv, "max_iters", "solver.max_iters", c.solver.max_iters);
        c.solver.grad_tol = read_or<double>(sv, "grad_tol", "solver.grad_tol", c.solver.grad_tol);
        c.solver.starts = read_or<int>(sv, "starts", "solver.starts", c.solver.starts);
        c.solver.seed = read_or<std::uint64_t>(sv, "seed", "solver.seed", c.solver.seed);
        if (c.solver.max_iters < 1) throw ConfigError("solver.max_iters: must be positive");
        if (!(c.solver.grad_tol > 0.0)) throw ConfigError("solver.grad_tol: must be positive");
        if (c.solver.starts < 1) throw ConfigError("solver.starts: must be at least 1");
    }
    c.quadrature_order = read_or<int>(j, "quadrature_order", "quadrature_order", 6);
    c.eig_tol = read_or<double>(j, "eig_tol", "eig_tol", 1e-10);
    c.cq_restarts = read_or<int>(j, "cq_restarts", "cq_restarts", 32);
    c.cq_inflation = read_or<double>(j, "cq_inflation", "cq_inflation", 1.10);
    c.seed = read_or<std::uint64_t>(j, "seed", "seed", 0);
    c.output_dir = read_or<std::string>(j, "output_dir", "output_dir", "fraclap_out");
    c.unsafe = read_or<bool>(j, "unsafe", "unsafe", false);
    if (c.quadrature_order < 1 || c.quadrature_order > 40) throw ConfigError("quadrature_order: must lie in [1, 40]");
    if (!(c.eig_tol > 0.0)) throw ConfigError("eig_tol: must be positive");
    if (c.cq_restarts < 1) throw ConfigError("cq_restarts: must be at least 1");
    if (!(c.cq_inflation >= 1.0)) throw ConfigError("cq_inflation: must be at least 1");

    const double n = c.domain.dim;
    const double two_star = n > 2.0 * c.s ? 2.0 * n / (n - 2.0 * c.s) : kInf;
    if (!(c.q < two_star)) throw ConfigError("q: must be below 2* = " + std::to_string(two_star));
    if (c.mode == Mode::SaturatingExample && c.q != 2.0) throw ConfigError("q: must be 2 in saturating_example mode");
    if (c.mode == Mode::ConstantWeight && !c.alpha) throw ConfigError("alpha: missing required key");
    return c;
}

/// Reads a JSON configuration file.
inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read '" + path.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return parse_config(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

}  // namespace fraclap
