#pragma once

#include "fraclap/pipeline_stages.hpp"

namespace fraclap {

namespace detail {

// Everything after configuration; exceptions propagate to run_pipeline.
inline void run_stages(const RunConfig& c, bool checks_only, PipelineResult& out) {
    ordered_json& R = out.report;
    CheckTable checks;
    const bool truncated_path = c.mode != Mode::Level;

    const Kernel K = make_kernel(c);
    const KernelCertificate cert = validate_conditions(K, c.kernel.samples);
    checks.add("k1", cert.k1, true, cert.k1_detail);
    checks.add("k2", cert.k2, true, cert.k2_detail);
    checks.add("k3", cert.k3, true, cert.k3_detail);

    out.mesh = make_mesh(c);
    const Mesh& mesh = *out.mesh;
    HField h = HField::constant(1.0);
    if (c.mode == Mode::ConstantWeight)
        h = HField::constant(*c.alpha);
    else if (c.mode != Mode::SaturatingExample)
        h = c.h.constant ? HField::constant(*c.h.constant) : read_piecewise_h(c.h.piecewise, mesh);

    const StiffnessSystem sys = assemble_stiffness(mesh, K, c.quadrature_order);
    R["mesh"] = {{"dim", mesh.dim},
                 {"elements", mesh.num_elements()},
                 {"nodes", mesh.nodes.size()},
                 {"dofs", mesh.num_dofs()},
                 {"h_max", mesh.h_max}};
    R["assembly"] = {{"quadrature_order", sys.quadrature_order}, {"pair_classes", sys.pair_classes}};

    const EigenPair ep = first_eigenpair(sys.A, sys.M, c.eig_tol);
    const double lambda1 = ep.lambda;
    R["lambda1"] = quantity(lambda1, c.eig_tol * lambda1, Provenance::Measured);
    R["eigen"] = {{"residual", json_number(ep.residual)}, {"iterations", ep.iterations}};

    const double n = mesh.dim;
    const double two_star = n > 2.0 * c.s ? 2.0 * n / (n - 2.0 * c.s) : kInf;
    const EmbeddingEstimate est = estimate_c_q(sys, mesh, c.q, c.cq_restarts, 1e-10, c.seed, two_star);
    const double c_q = est.c_q_lower * c.cq_inflation;
    R["embedding"] = {{"q", config_value(c.q)},
                      {"two_star", json_number(two_star)},
                      {"c_q_raw", quantity(est.c_q_lower, 1e-10 * est.c_q_lower, Provenance::Measured)},
                      {"c_q_inflated", quantity(c_q, 1e-10 * c_q, Provenance::Derived)},
                      {"inflation", config_value(c.cq_inflation)},
                      {"restarts", est.restarts}};

    const double esssup = h.ess_sup(mesh), essinf = h.ess_inf(mesh), l1 = h.l1_norm(mesh);
    R["h"] = {{"esssup", quantity(esssup, 0.0, Provenance::Derived)},
              {"essinf", quantity(essinf, 0.0, Provenance::Derived)},
              {"l1", quantity(l1, 1e-14 * l1, Provenance::Derived)}};

    // the nonlinearity actually used
    Nonlinearity nl = make_nonlinearity(c.f);
    if (c.mode == Mode::SaturatingExample || c.mode == Mode::ConstantWeight) {
        const Nonlinearity base = (c.mode == Mode::SaturatingExample && !c.f_given) ? Nonlinearity::saturating(1.0) : nl;
        const LiminfEstimate li = liminf_F_over_xi2_at_zero(base);
        const double threshold = alpha_threshold(lambda1, li);
        const double alpha = c.alpha.value_or(2.0 * lambda1);
        R["weight"] = {{"alpha", quantity(alpha, 0.0, c.alpha ? Provenance::Config : Provenance::Derived)},
                       {"alpha_threshold", quantity(threshold, c.eig_tol * threshold, Provenance::Derived)},
                       {"liminf_F_over_xi2", quantity(li.value, std::abs(li.finest_min - li.extrapolated),
                                                      Provenance::Measured)}};
        if (c.mode == Mode::SaturatingExample) {
            nl = base.scaled(alpha);
        } else {
            checks.add("weight_threshold", verdict_of(alpha > threshold), true,
                       "alpha must exceed lambda1 / (2 liminf F(xi)/xi^2)");
            const double far = base.F(1e8) / 1e16, near = base.F(1.0);
            checks.add("quadratic_decay_at_infinity", verdict_of(far <= 1e-6 * std::max(std::abs(near), 1e-300)), true,
                       "F(xi)/xi^2 must vanish as xi grows");
        }
    }
    if (truncated_path) nl = nl.truncated();
    const AuxFunction psi = (c.mode == Mode::Level && !c.psi.expr.empty()) ? AuxFunction::expression(c.psi.expr, c.q)
                                                                           : AuxFunction::default_power(c.q);

    checks.add(check_class_A(nl, two_star));
    std::optional<H3Result> h3;
    if (truncated_path) {
        checks.add(check_h1(nl, c.q));
        checks.add(check_h2(nl, lambda1, essinf));
        h3 = check_h3(nl, c.q, c_q, esssup, l1);
        checks.add(h3->check);
        R["h3"] = {{"xi0", json_number(h3->xi0)}, {"margin", json_number(h3->margin)}};
    }
    for (const auto& r : check_psi_family(psi)) checks.add(r);

    const double a = truncated_path ? 0.0 : c.a, b = truncated_path ? kInf : c.b;
    const GLambdaAnalysis an = analyze_g_lambda(nl, psi, a, b);
    checks.add("alpha_lt_beta", an.alpha_lt_beta(), true);
    R["g_lambda"] = {{"a", json_number(a)},
                     {"b", json_number(b)},
                     {"alpha", quantity(an.alpha_val, 1e-9 * std::max(1.0, std::abs(an.alpha_val)), Provenance::Measured)},
                     {"beta", quantity(an.beta_val, 1e-9 * std::max(1.0, std::abs(an.beta_val)), Provenance::Measured)},
                     {"coercive", to_string(an.coercive)},
                     {"unique_minimizer", to_string(an.unique)}};

    std::optional<LevelParameter> lp;
    std::optional<ConditionF> cf;
    std::string level_note;
    try {
        if (c.mode == Mode::Level && !c.r.value) {
            const RSearch rs = search_r(nl, psi, an, c_q, esssup, l1);
            lp = rs.level;
            cf = rs.condition;
            ordered_json passing = ordered_json::array();
            for (double r : rs.passing) passing.push_back(r);
            R["r_search"] = {{"passing", passing}};
        } else {
            std::optional<double> r = c.r.value;
            if (truncated_path) r = h3 && h3->check.verdict == Verdict::Pass ? std::optional(std::pow(h3->xi0, c.q)) : std::nullopt;
            if (r && an.alpha_lt_beta() == Verdict::Pass) {
                lp = find_level_parameter(nl, psi, *r, an);
                cf = check_condition_F(nl, psi, *lp, c_q, esssup, l1);
            }
        }
    } catch (const DomainError& e) {
        level_note = e.what();
    } catch (const NumericError& e) {
        level_note = e.what();
    }
    if (cf)
        checks.add(cf->check);
    else
        checks.add("F", Verdict::Fail, true, level_note.empty() ? "no admissible level r" : level_note);
    if (lp)
        R["level"] = {{"r", quantity(lp->r, 0.0, c.r.value && !truncated_path ? Provenance::Config : Provenance::Derived)},
                      {"lambda_r", quantity(lp->lambda_r, 1e-8 * lp->lambda_r, Provenance::Measured)},
                      {"xi_star", quantity(lp->xi_star, 1e-8 * std::max(1.0, std::abs(lp->xi_star)), Provenance::Measured)},
                      {"psi_value", json_number(lp->psi_value)}};
    if (cf)
        R["condition_F"] = {{"lhs", quantity(cf->lhs, 1e-10 * std::abs(cf->lhs), Provenance::Measured)},
                            {"rhs", quantity(cf->rhs, 1e-10 * cf->rhs, Provenance::Derived)},
                            {"margin", json_number(cf->margin)}};
    R["hypotheses"] = checks.json;

    if (!checks.all_pass()) {
        out.exit_code = kExitHypothesis;
        out.message = "hypotheses not satisfied: " + join(checks.failing);
        if (!c.unsafe || !lp) return;
    }
    if (checks_only || c.mode == Mode::ChecksOnly) return;

    const BallConstraint ball = BallConstraint::from_level(lp->r, c.q, c_q, psi.gamma_psi(), esssup, l1);
    R["ball"] = {{"r", json_number(ball.r)},
                 {"sigma", quantity(ball.sigma, 1e-12 * ball.sigma, Provenance::Derived)},
                 {"gamma_psi", json_number(psi.gamma_psi())}};

    const Problem p{sys, mesh, h, nl};
    std::optional<NontrivialityWitness> witness;
    if (essinf > 0.0) witness = nontriviality_certificate(p, ep.e, lambda1, essinf);
    if (witness)
        R["witness"] = {{"found", witness->found},
                        {"delta_hat", json_number(witness->delta_hat)},
                        {"eta_max", json_number(witness->eta_max)},
                        {"eta", json_number(witness->eta)},
                        {"energy", json_number(witness->energy)},
                        {"energy_first_pass", json_number(witness->energy_first)}};

    const SolveReport rep = solve_in_ball(p, ball, ep.e, witness, c.solver);
    const double e_tol = 1e-10 * std::max(1.0, std::abs(rep.energy));
    R["solution"] = {{"energy", quantity(rep.energy, e_tol, Provenance::Measured)},
                     {"x0_norm_sq", quantity(rep.x0_norm_sq, 1e-12 * ball.sigma, Provenance::Measured)},
                     {"sigma", quantity(ball.sigma, 1e-12 * ball.sigma, Provenance::Derived)},
                     {"min_nodal", json_number(rep.min_nodal)},
                     {"max_nodal", json_number(rep.max_nodal)},
                     {"residual_inf", quantity(rep.residual.residual_inf, 0.0, Provenance::Measured)},
                     {"load_inf", json_number(rep.residual.load_inf)},
                     {"iterations", rep.iterations},
                     {"best_start", rep.best_start},
                     {"half_threshold", json_number(rep.half_threshold)}};

    CheckTable certs;
    certs.add("nonnegative", rep.nonnegative, truncated_path, "all nodal values >= -1e-10");
    certs.add("F2", rep.bound_F2, true, "u^T A u < sigma with margin 1e-12 sigma");
    certs.add("nontrivial", rep.nontrivial, true, "J(u) < 0");
    certs.add("weak_residual", rep.residual.verdict, true,
              rep.residual.interior ? "||A u - b(u)||_inf" : "projected gradient on the sphere");
    certs.add("half_threshold", verdict_of(rep.half_threshold < 0.5), cf && cf->check.verdict == Verdict::Pass,
              "sup of int h F(u) / sigma over iterates stays below 1/2");
    R["certificates"] = certs.json;

    out.nodal = nodal_values(mesh, rep.u);
    out.has_solution = true;
    if (out.exit_code == kExitOk && !certs.all_pass()) {
        out.exit_code = kExitNumeric;
        out.message = "certificates not satisfied: " + join(certs.failing);
    }
}

}  // namespace detail

/// Runs every stage and assembles the report. Never throws for bad input:
/// failures become exit codes with a message recorded in report.status.
inline PipelineResult run_pipeline(const RunConfig& c, bool checks_only = false) {
    PipelineResult out;
    out.report["fraclap_version"] = kVersion;
    out.report["mode"] = checks_only ? "checks" : to_string(c.mode);
    out.report["config"] = detail::config_echo(c);
    try {
        detail::run_stages(c, checks_only, out);
    } catch (const ConfigError& e) {
        out.exit_code = kExitConfig;
        out.message = e.what();
    } catch (const HypothesisError& e) {
        out.exit_code = kExitHypothesis;
        out.message = e.what();
    } catch (const std::exception& e) {
        out.exit_code = kExitNumeric;
        out.message = e.what();
    }
    if (out.exit_code == kExitOk) out.message = "ok";
    out.report["status"] = {{"exit_code", out.exit_code}, {"message", out.message}};
    return out;
}

/// report.json always; solution.csv and plot.dat when a solution exists.
inline void write_outputs(const PipelineResult& res, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    write_report(dir / "report.json", res.report);
    if (res.has_solution && res.mesh) {
        write_solution_csv(dir / "solution.csv", *res.mesh, res.nodal);
        write_plot_dat(dir / "plot.dat", *res.mesh, res.nodal);
    }
}

}  // namespace fraclap
