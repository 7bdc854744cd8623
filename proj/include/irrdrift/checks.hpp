#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenario.hpp"

namespace irrdrift::cli {

struct CheckResult {
    std::string name;
    std::string status = "pass";  // pass | fail | warn
    std::map<std::string, double> metrics;
    std::string note;
    std::vector<std::string> outputs;  // files written under the run directory
};

namespace detail {

inline double sup_window(const GridFunction& a, const GridFunction& b, double lo, double hi) {
    double worst = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double x = a.node(i);
        if (x < lo || x > hi) continue;
        worst = std::max(worst, std::abs(a.value(i) - b(x)));
    }
    return worst;
}

inline void set_status(CheckResult& r, bool ok) {
    if (!ok) r.status = "fail";
}

inline GridFunction mollified_environment(const GridFunction& b, unsigned n) {
    auto bn = mollify(b, Mollifier{Mollifier::Kind::compact_bump, n});
    double off = bn(0.0);
    return bn.map([off](double v) { return v - off; });
}

}  // namespace detail

inline CheckResult check_feasibility(const Context& ctx, const std::string& outdir) {
    CheckResult r{"feasibility"};
    auto rep = scale::feasibility(ctx.coeffs, ctx.sigma.sigma_big);
    r.metrics["aronson_c"] = rep.aronson_c;
    r.metrics["aronson_C"] = rep.aronson_C;
    r.metrics["nonexplosion_left"] = rep.nonexplosion_left ? 1 : 0;
    r.metrics["nonexplosion_right"] = rep.nonexplosion_right ? 1 : 0;
    detail::set_status(r, rep.aronson_ok);
    if (r.status == "pass" && !(rep.nonexplosion_left && rep.nonexplosion_right)) {
        r.status = "warn";
        r.note = "nonexplosion trend fails on the truncation; proceeding with the local Aronson bound";
    }
    nlohmann::json j{{"aronson_c", rep.aronson_c},
                     {"aronson_C", rep.aronson_C},
                     {"aronson_ok", rep.aronson_ok},
                     {"nonexplosion_left", rep.nonexplosion_left},
                     {"nonexplosion_right", rep.nonexplosion_right},
                     {"scale_increments_left", rep.scale_increments_left},
                     {"scale_increments_right", rep.scale_increments_right},
                     {"speed_increments_left", rep.speed_increments_left},
                     {"speed_increments_right", rep.speed_increments_right}};
    io::write_file(outdir + "/feasibility.json", j.dump(2) + "\n");
    r.outputs.push_back("feasibility.json");
    return r;
}

inline CheckResult check_sigma_routes(const Context& ctx, const std::string&) {
    CheckResult r{"sigma_routes"};
    if (!ctx.coeffs.smooth) {
        r.status = "warn";
        r.note = "route cross-validation needs smooth coefficients; skipped";
        return r;
    }
    double L = ctx.sc.L, half = L / 2.0;
    auto base = ctx.sigma.sigma_big;
    auto alt = ctx.coeffs;
    alt.route = scale::CoefficientPair::Route::smooth_drift;
    double d1 = detail::sup_window(scale::compute_sigma_big(alt).sigma_big, base, -half, half);
    alt.route = scale::CoefficientPair::Route::mollifier_limit;
    auto mg = scale::compute_sigma_big(alt, Mollifier::Kind::gaussian);
    auto mc = scale::compute_sigma_big(alt, Mollifier::Kind::compact_bump);
    double d2 = detail::sup_window(mg.sigma_big, base, -half, half);
    double d3 = detail::sup_window(mc.sigma_big, base, -half, half);
    r.metrics["smooth_drift_dev"] = d1;
    r.metrics["mollifier_gaussian_dev"] = d2;
    r.metrics["mollifier_bump_dev"] = d3;
    r.metrics["gaussian_sweep_final_delta"] = mg.sweep.deltas.back();
    detail::set_status(r, d1 < 1e-2 && d2 < 1e-2 && d3 < 1e-2 &&
                              mg.sweep.deltas.back() < mg.sweep.deltas.front());
    return r;
}

inline CheckResult check_scale_identities(const Context& ctx, const std::string& outdir) {
    CheckResult r{"scale_identities"};
    const auto& m = ctx.maps;
    double h0 = std::abs(m.h(0.0));
    double hp0 = std::abs(m.h_prime(0.0) - 1.0);
    auto H = scale::divergence_normalizer(m);
    auto Hk = compose(H, m.k);
    double tol = 2.0 * (H.interpolation_tolerance() + m.h.interpolation_tolerance()) + 5e-5;
    double hk = detail::sup_window(Hk, m.h, m.h.x_min(), m.h.x_max());
    r.metrics["h_at_0"] = h0;
    r.metrics["h_prime_at_0_minus_1"] = hp0;
    r.metrics["H_of_k_vs_h"] = hk;
    r.metrics["H_of_k_tolerance"] = tol;
    bool ok = h0 == 0.0 && hp0 == 0.0 && hk <= tol;
    if (ctx.coeffs.smooth) {
        auto t1b = scale::apply_T(ctx.coeffs.b, m, ctx.coeffs, 1.0);
        auto id = GridFunction::sample(ctx.coeffs.b.x_min(), ctx.coeffs.b.x_max(),
                                       ctx.coeffs.b.size(), [](double x) { return x; });
        double dev = detail::sup_window(t1b.f, id, -1.0, 1.0);
        r.metrics["T1b_vs_id"] = dev;
        ok = ok && dev < 1e-3;
    }
    detail::set_status(r, ok);
    io::write_grid_function(outdir + "/h.csv", m.h);
    io::write_grid_function(outdir + "/h_prime.csv", m.h_prime);
    io::write_grid_function(outdir + "/h_inv.csv", m.h_inv);
    io::write_grid_function(outdir + "/k.csv", m.k);
    io::write_grid_function(outdir + "/k_inv.csv", m.k_inv);
    io::write_grid_function(outdir + "/sigma_h_tilde.csv", m.sigma_h_tilde);
    io::write_grid_function(outdir + "/sigma_k_bar.csv", m.sigma_k_bar);
    io::write_grid_function(outdir + "/sigma_big.csv", m.Sigma);
    for (const char* f : {"h.csv", "h_prime.csv", "h_inv.csv", "k.csv", "k_inv.csv",
                          "sigma_h_tilde.csv", "sigma_k_bar.csv", "sigma_big.csv"})
        r.outputs.push_back(f);
    return r;
}

inline CheckResult check_hatl_anchors(const Context& ctx, const std::string&) {
    CheckResult r{"hatl_anchors"};
    auto id = GridFunction::sample(ctx.coeffs.b.x_min(), ctx.coeffs.b.x_max(),
                                   ctx.coeffs.b.size(), [](double x) { return x; });
    auto lid = scale::hat_L(id, ctx.coeffs);
    double d1 = detail::sup_window(lid, ctx.coeffs.b, ctx.coeffs.b.x_min(), ctx.coeffs.b.x_max());
    r.metrics["hatL_id_vs_b"] = d1;
    bool ok = d1 < 1e-9 * (1.0 + ctx.coeffs.b.max_abs());
    if (ctx.coeffs.smooth) {
        auto lh = scale::hat_L(ctx.maps.h, ctx.coeffs);
        double d2 = lh.max_abs();
        r.metrics["sup_hatL_h"] = d2;
        ok = ok && d2 < 1e-3;
    }
    detail::set_status(r, ok);
    return r;
}

inline CheckResult check_martingale(const Context& ctx, const std::string& outdir, bool squared) {
    CheckResult r{squared ? "martingale_h2" : "martingale_h"};
    auto run = ctx.make_run(0.0, squared ? 2 : 1);
    auto rep = sde::verify_martingale_problem(
        run, squared ? sde::MartingaleTestReport::Test::h_squared
                     : sde::MartingaleTestReport::Test::h);
    double worst = 0;
    for (std::size_t k = 0; k < rep.increment_means.size(); ++k)
        worst = std::max(worst, std::abs(rep.increment_means[k]) /
                                    std::max(rep.standard_errors[k], 1e-300));
    r.metrics["worst_z"] = worst;
    r.metrics["exit_fraction"] = rep.exit_fraction;
    r.metrics["n_used"] = static_cast<double>(rep.n_used);
    detail::set_status(r, rep.pass);
    if (r.status == "pass" && rep.exit_fraction > 0.2) r.status = "warn";
    std::ostringstream nd;
    for (std::size_t k = 0; k < rep.checkpoints.size(); ++k)
        nd << nlohmann::json{{"checkpoint", rep.checkpoints[k]},
                             {"mean", rep.increment_means[k]},
                             {"se", rep.standard_errors[k]}}
                  .dump()
           << "\n";
    std::string fname = r.name + ".ndjson";
    io::write_file(outdir + "/" + fname, nd.str());
    r.outputs.push_back(fname);
    return r;
}

inline CheckResult check_qv_identity(const Context& ctx, const std::string&) {
    CheckResult r{"qv_identity"};
    auto run = ctx.make_run(0.0, 3);
    run.n_paths = std::min<std::size_t>(ctx.sc.n_paths, 256);
    run.dt = std::min(ctx.sc.dt, 1e-4);
    auto rep = sde::quadratic_variation_check(run);
    r.metrics["median_rel_dev"] = rep.median_rel_dev;
    r.metrics["epsilon"] = rep.epsilon;
    detail::set_status(r, rep.median_rel_dev < 0.05);
    return r;
}

inline CheckResult check_decomposition(const Context& ctx, const std::string&) {
    CheckResult r{"decomposition"};
    if (!ctx.coeffs.smooth) {
        r.status = "warn";
        r.note = "decomposition check uses the direct classical simulation; needs smooth coefficients";
        return r;
    }
    auto Tb = scale::apply_T(ctx.coeffs.b, ctx.maps, ctx.coeffs, 0.0);
    auto rep_at = [&](double dt) {
        sde::ClassicalEulerRun cr;
        cr.coeffs = ctx.coeffs;
        cr.x0 = 0.0;
        cr.T = ctx.sc.T;
        cr.dt = dt;
        cr.n_paths = std::min<std::size_t>(ctx.sc.n_paths, 512);
        cr.seed = rng::sub_seed(ctx.sc.seed, 4);
        return sde::decomposition_check_classical(cr, Tb);
    };
    auto r1 = rep_at(ctx.sc.dt);
    auto r2 = rep_at(ctx.sc.dt / 2.0);
    double ratio = r2.median_sup / std::max(r1.median_sup, 1e-300);
    double rel = r2.median_sup / std::max(r2.median_range, 1e-300);
    r.metrics["halving_ratio"] = ratio;
    r.metrics["final_rel_sup"] = rel;
    detail::set_status(r, ratio <= 0.5 && rel < 0.02);
    return r;
}

inline CheckResult check_classical_equivalence(const Context& ctx, const std::string&) {
    CheckResult r{"classical_equivalence"};
    if (!ctx.coeffs.smooth) {
        r.status = "warn";
        r.note = "needs smooth coefficients; skipped";
        return r;
    }
    auto run = ctx.make_run(0.0, 5);
    run.n_paths = std::min<std::size_t>(ctx.sc.n_paths, 10000);
    auto transformed = sde::terminal_law(run);
    sde::ClassicalEulerRun cr;
    cr.coeffs = ctx.coeffs;
    cr.x0 = 0.0;
    cr.T = ctx.sc.T;
    cr.dt = ctx.sc.dt;
    cr.n_paths = run.n_paths;
    cr.seed = rng::sub_seed(ctx.sc.seed, 6);
    auto direct = sde::classical_euler_terminal_law(cr);
    double d = sde::ks_distance(transformed.terminals, direct.terminals);
    double crit = sde::ks_critical(transformed.terminals.size(), direct.terminals.size(), 0.05);
    r.metrics["ks_distance"] = d;
    r.metrics["ks_critical"] = crit;
    detail::set_status(r, d < crit);
    return r;
}

inline CheckResult check_pde_solvers(const Context& ctx, const std::string& outdir) {
    CheckResult r{"pde_solvers"};
    auto fd = pde::solve_fd(ctx.problem, 0.0);
    auto fk = pde::solve_fd(ctx.problem, 0.0, pde::FdCoords::k_divergence);
    auto probes = ctx.probes();
    auto mc = pde::solve_mc(ctx.problem, 0.0, probes, ctx.sc.n_paths,
                            rng::sub_seed(ctx.sc.seed, 7), ctx.sc.dt);
    double range = fd.at_s().max_value() - fd.at_s().min_value();
    bool ok = true;
    double worst_mc = 0, worst_k = 0;
    for (std::size_t q = 0; q < probes.size(); ++q) {
        double tol = std::max(3.0 * mc.se[q], 0.02 * std::max(range, 1e-12));
        double dev = std::abs(mc.u[q] - fd.at_s()(probes[q]));
        worst_mc = std::max(worst_mc, dev - tol);
        ok = ok && dev <= tol;
        double devk = std::abs(fk.at_s()(probes[q]) - fd.at_s()(probes[q]));
        worst_k = std::max(worst_k, devk);
        ok = ok && devk <= 0.02 * std::max(range, 1e-12);
    }
    if (ctx.sc.coeff_kind == "heat" && ctx.sc.u0_kind == "sin" && ctx.sc.lambda_const == 0.0) {
        double w = ctx.sc.u0_param;
        double worst = 0;
        for (double x : probes) {
            double exact = std::exp(-0.5 * w * w * ctx.sc.T) * std::sin(w * x);
            worst = std::max(worst, std::abs(fd.at_s()(x) - exact));
        }
        r.metrics["heat_closed_form_dev"] = worst;
        ok = ok && worst < 1e-3;
    }
    r.metrics["mc_fd_excess"] = worst_mc;
    r.metrics["k_route_dev"] = worst_k;
    detail::set_status(r, ok);
    io::write_grid_function(outdir + "/u_at_s.csv", fd.at_s());
    r.outputs.push_back("u_at_s.csv");
    return r;
}

inline CheckResult check_kernels(const Context& ctx, const std::string& outdir) {
    CheckResult r{"kernels"};
    double L = ctx.sc.L;
    auto target = GridFunction::sample(-L, L, 241, [](double) { return 0.0; });
    auto est = pde::estimate_kernel(ctx.coeffs, ctx.maps, ctx.sc.T, {0.0},
                                    std::min<std::size_t>(ctx.sc.n_paths, 20000), 0.0,
                                    rng::sub_seed(ctx.sc.seed, 8), target, ctx.sc.dt);
    auto chk = pde::aronson_check(est);
    r.metrics["aronson_feasible"] = chk.feasible ? 1 : 0;
    r.metrics["aronson_M"] = chk.M;
    r.metrics["bandwidth"] = est.bandwidths[0];
    r.metrics["exit_fraction"] = est.exit_fractions[0];
    detail::set_status(r, chk.feasible && chk.M <= 10.0);
    std::ostringstream csv;
    csv << "y,density\n";
    for (std::size_t i = 0; i < est.rows[0].size(); ++i)
        csv << est.rows[0].node(i) << ',' << est.rows[0].value(i) << '\n';
    io::write_file(outdir + "/kernel_row0.csv", csv.str());
    nlohmann::json meta{{"t", est.t},
                        {"bandwidth", est.bandwidths[0]},
                        {"n_paths", est.n_paths},
                        {"exit_fraction", est.exit_fractions[0]}};
    io::write_file(outdir + "/kernel_row0.csv.json", meta.dump() + "\n");
    r.outputs.push_back("kernel_row0.csv");
    return r;
}

inline CheckResult check_bounded_stability(const Context& ctx, const std::string&) {
    CheckResult r{"bounded_stability"};
    double bound = ctx.problem.u0.max_abs() + ctx.sc.T * ctx.problem.lambda.max_abs();
    auto fd_irregular = pde::solve_fd(ctx.problem, 0.0);
    auto probes = ctx.probes();
    double prev = 1e100;
    bool ok = true;
    int idx = 0;
    for (unsigned n : {8u, 16u, 32u, 64u}) {
        auto coeffs_n = ctx.coeffs;
        coeffs_n.b = detail::mollified_environment(ctx.coeffs.b, n);
        auto maps_n = scale::build_scale_maps(coeffs_n, scale::compute_sigma_big(coeffs_n).sigma_big);
        pde::CauchyProblem pn = ctx.problem;
        pn.coeffs = coeffs_n;
        pn.maps = maps_n;
        auto fd_n = pde::solve_fd(pn, 0.0);
        double sup_u = 0;
        for (const auto& f : fd_n.u.frames) sup_u = std::max(sup_u, f.max_abs());
        ok = ok && sup_u <= bound * (1.0 + 1e-9);
        double dist = 0;
        for (double x : probes) dist = std::max(dist, std::abs(fd_n.at_s()(x) - fd_irregular.at_s()(x)));
        r.metrics["dist_n" + std::to_string(n)] = dist;
        if (idx > 0) ok = ok && dist <= prev * 1.05;
        prev = dist;
        ++idx;
    }
    detail::set_status(r, ok);
    return r;
}

inline CheckResult check_spde_residual(const Context& ctx, const std::string& outdir) {
    CheckResult r{"spde_residual"};
    if (ctx.sc.coeff_kind != "environment") {
        r.status = "warn";
        r.note = "spde pipeline needs an environment scenario with sigma = 1";
        return r;
    }
    spde::SpdeScenario sc;
    sc.env_seed = ctx.sc.env_seed;
    sc.hurst = ctx.sc.hurst;
    sc.L = ctx.sc.L;
    std::size_t n = 1;
    while (n + 1 < ctx.sc.n_points) n <<= 1;
    sc.n_finest = n + 1;
    sc.T = ctx.sc.T;
    sc.u0_width = ctx.sc.u0_param;
    sc.lambda_const = ctx.sc.lambda_const;
    auto rep = spde::run_spde_pipeline(sc);
    r.metrics["final_max_rel_residual"] = rep.final_max_rel_residual;
    r.metrics["duality_gap"] = rep.duality_gap;
    bool decreasing = true;
    for (std::size_t i = rep.stages.size() >= 3 ? rep.stages.size() - 2 : 1;
         i < rep.stages.size(); ++i)
        decreasing = decreasing &&
                     rep.stages[i].max_rel_residual < rep.stages[i - 1].max_rel_residual;
    detail::set_status(r, decreasing && rep.final_max_rel_residual < 0.02);
    std::ostringstream csv;
    csv << "epsilon,max_rel_residual\n";
    for (const auto& st : rep.stages) csv << st.epsilon << ',' << st.max_rel_residual << '\n';
    io::write_file(outdir + "/residual_vs_epsilon.csv", csv.str());
    r.outputs.push_back("residual_vs_epsilon.csv");
    nlohmann::json j;
    j["duality_gap"] = rep.duality_gap;
    j["final_max_rel_residual"] = rep.final_max_rel_residual;
    j["residual_vs_epsilon_csv"] = csv.str();
    {
        std::ostringstream cert;
        cert << "epsilon,terminal_value\n";
        for (std::size_t i = 0; i < rep.cubic_certificate.epsilons.size(); ++i)
            cert << rep.cubic_certificate.epsilons[i] << ','
                 << rep.cubic_certificate.terminal_values[i] << '\n';
        j["cubic_certificate_csv"] = cert.str();
    }
    io::write_file(outdir + "/spde_report.json", j.dump(2) + "\n");
    r.outputs.push_back("spde_report.json");
    return r;
}

inline CheckResult check_spde_duality(const Context& ctx, const std::string&) {
    CheckResult r{"spde_duality"};
    if (ctx.sc.coeff_kind != "environment") {
        r.status = "warn";
        r.note = "needs an environment scenario";
        return r;
    }
    spde::SpdeScenario sc;
    sc.env_seed = ctx.sc.env_seed;
    sc.hurst = ctx.sc.hurst;
    sc.L = ctx.sc.L;
    std::size_t n = 1;
    while (n + 1 < std::min<std::size_t>(ctx.sc.n_points, 1025)) n <<= 1;
    sc.n_finest = n + 1;
    sc.stages = 2;
    sc.time_steps_finest = 128;
    auto rep = spde::run_spde_pipeline(sc);
    r.metrics["duality_gap"] = rep.duality_gap;
    detail::set_status(r, rep.duality_gap < 1e-12);
    return r;
}

inline CheckResult run_check(const Context& ctx, const std::string& name,
                             const std::string& outdir) {
    try {
        if (name == "feasibility") return check_feasibility(ctx, outdir);
        if (name == "sigma_routes") return check_sigma_routes(ctx, outdir);
        if (name == "scale_identities") return check_scale_identities(ctx, outdir);
        if (name == "hatl_anchors") return check_hatl_anchors(ctx, outdir);
        if (name == "martingale_h") return check_martingale(ctx, outdir, false);
        if (name == "martingale_h2") return check_martingale(ctx, outdir, true);
        if (name == "qv_identity") return check_qv_identity(ctx, outdir);
        if (name == "decomposition") return check_decomposition(ctx, outdir);
        if (name == "classical_equivalence") return check_classical_equivalence(ctx, outdir);
        if (name == "pde_solvers") return check_pde_solvers(ctx, outdir);
        if (name == "kernels") return check_kernels(ctx, outdir);
        if (name == "bounded_stability") return check_bounded_stability(ctx, outdir);
        if (name == "spde_residual") return check_spde_residual(ctx, outdir);
        if (name == "spde_duality") return check_spde_duality(ctx, outdir);
        CheckResult r{name};
        r.status = "fail";
        r.note = "unknown check";
        return r;
    } catch (const std::exception& ex) {
        CheckResult r{name};
        r.status = "fail";
        r.note = std::string("exception: ") + ex.what();
        return r;
    }
}

struct RunManifest {
    nlohmann::json json;

    // everything except the timestamp field, for reproducibility comparisons
    std::string fingerprint() const {
        nlohmann::json j = json;
        j.erase("timestamp");
        return j.dump(2);
    }
};

inline RunManifest run_scenario(const Scenario& sc, const std::string& outdir_base,
                                const std::vector<std::string>& only_checks = {}) {
    auto hash = scenario_hash(sc);
    char hex[32];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(hash));
    std::string outdir = outdir_base + "/" + sc.name + "-" + hex;
    std::filesystem::create_directories(outdir);

    auto ctx = Context::build(sc);
    std::vector<std::string> checks = only_checks.empty() ? sc.checks : only_checks;

    RunManifest manifest;
    manifest.json["scenario_hash"] = std::string(hex);
    manifest.json["tool_version"] = kToolVersion;
    manifest.json["scenario"] = sc.canonical();
    manifest.json["seed_overridden_by_env"] = sc.seed_overridden;
    manifest.json["checks"] = nlohmann::json::object();
    manifest.json["outputs"] = nlohmann::json::array();
    for (const auto& name : checks) {
        auto res = run_check(ctx, name, outdir);
        nlohmann::json cj{{"status", res.status}, {"metrics", res.metrics}};
        if (!res.note.empty()) cj["note"] = res.note;
        manifest.json["checks"][name] = cj;
        for (const auto& f : res.outputs) manifest.json["outputs"].push_back(f);
    }
    auto now = std::chrono::system_clock::now().time_since_epoch();
    manifest.json["timestamp"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
    io::write_file(outdir + "/manifest.json", manifest.json.dump(2) + "\n");
    return manifest;
}

inline bool manifest_all_pass(const RunManifest& m) {
    for (const auto& [name, cj] : m.json["checks"].items())
        if (cj["status"].get<std::string>() == "fail") return false;
    return true;
}

}  // namespace irrdrift::cli
