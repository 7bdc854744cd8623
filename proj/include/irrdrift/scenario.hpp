#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "io.hpp"
#include "noise.hpp"
#include "parallel.hpp"
#include "pde.hpp"
#include "scale.hpp"
#include "sde.hpp"
#include "spde.hpp"

namespace irrdrift::cli {

inline constexpr const char* kToolVersion = "irrdrift 0.1.0";

// Declarative experiment description, parsed from versioned JSON.
struct Scenario {
    std::string name;
    std::string coeff_kind;  // heat | smooth_sin | divergence | environment | csv
    double hurst = 0.5;
    std::uint64_t env_seed = 1;
    std::string sigma_csv, b_csv;  // coeff_kind == csv
    double L = 4.0;
    std::size_t n_points = 2049;
    double T = 1.0;
    double dt = 1e-3;
    std::size_t n_paths = 20000;
    std::uint64_t seed = 1;
    bool seed_overridden = false;  // IRRDRIFT_SEED applied
    std::string u0_kind = "bump";  // sin | bump | const
    double u0_param = 1.0;
    double lambda_const = 0.0;
    std::vector<std::string> checks;

    nlohmann::json canonical() const {
        return nlohmann::json{{"name", name},
                              {"coefficients",
                               {{"kind", coeff_kind},
                                {"hurst", hurst},
                                {"env_seed", env_seed},
                                {"sigma_csv", sigma_csv},
                                {"b_csv", b_csv}}},
                              {"domain", {{"L", L}, {"n_points", n_points}}},
                              {"solver",
                               {{"T", T}, {"dt", dt}, {"n_paths", n_paths}, {"seed", seed}}},
                              {"problem",
                               {{"u0", u0_kind},
                                {"u0_param", u0_param},
                                {"lambda_const", lambda_const}}},
                              {"checks", checks}};
    }
};

inline const std::vector<std::string>& known_checks() {
    static const std::vector<std::string> names = {
        "feasibility",    "sigma_routes",   "scale_identities", "hatl_anchors",
        "martingale_h",   "martingale_h2",  "qv_identity",      "decomposition",
        "classical_equivalence", "pde_solvers", "kernels",       "bounded_stability",
        "spde_residual",  "spde_duality"};
    return names;
}

// Parse + validate; collects every violation instead of stopping at the first.
inline Scenario parse_scenario(const nlohmann::json& j, std::vector<std::string>& errors) {
    Scenario sc;
    auto expect = [&](bool ok, const std::string& msg) {
        if (!ok) errors.push_back(msg);
        return ok;
    };
    expect(j.contains("version") && j["version"].get<int>() == 1, "config version must be 1");
    if (j.contains("name")) sc.name = j["name"].get<std::string>();
    expect(!sc.name.empty(), "name is required");
    if (j.contains("coefficients")) {
        const auto& c = j["coefficients"];
        if (c.contains("kind")) sc.coeff_kind = c["kind"].get<std::string>();
        if (c.contains("hurst")) sc.hurst = c["hurst"].get<double>();
        if (c.contains("env_seed")) sc.env_seed = c["env_seed"].get<std::uint64_t>();
        if (c.contains("sigma_csv")) sc.sigma_csv = c["sigma_csv"].get<std::string>();
        if (c.contains("b_csv")) sc.b_csv = c["b_csv"].get<std::string>();
    }
    expect(sc.coeff_kind == "heat" || sc.coeff_kind == "smooth_sin" ||
               sc.coeff_kind == "divergence" || sc.coeff_kind == "environment" ||
               sc.coeff_kind == "csv",
           "coefficients.kind must be one of heat|smooth_sin|divergence|environment|csv");
    if (sc.coeff_kind == "environment")
        expect(sc.hurst >= 1.0 / 3.0, "environment hurst must satisfy hurst >= 1/3");
    if (sc.coeff_kind == "csv") {
        expect(!sc.sigma_csv.empty() && std::filesystem::exists(sc.sigma_csv),
               "coefficients.sigma_csv must name an existing file");
        expect(!sc.b_csv.empty() && std::filesystem::exists(sc.b_csv),
               "coefficients.b_csv must name an existing file");
    }
    if (j.contains("domain")) {
        const auto& d = j["domain"];
        if (d.contains("L")) sc.L = d["L"].get<double>();
        if (d.contains("n_points")) sc.n_points = d["n_points"].get<std::size_t>();
    }
    expect(sc.L > 0, "domain.L must be positive");
    expect(sc.n_points >= 65, "domain.n_points must be at least 65");
    if (j.contains("solver")) {
        const auto& s = j["solver"];
        if (s.contains("T")) sc.T = s["T"].get<double>();
        if (s.contains("dt")) sc.dt = s["dt"].get<double>();
        if (s.contains("n_paths")) sc.n_paths = s["n_paths"].get<std::size_t>();
        if (s.contains("seed")) {
            sc.seed = s["seed"].get<std::uint64_t>();
        } else {
            errors.push_back("solver.seed is mandatory (no wall-clock seeding)");
        }
    } else {
        errors.push_back("solver section (with mandatory seed) is required");
    }
    expect(sc.T > 0 && sc.dt > 0 && sc.dt < sc.T, "solver needs 0 < dt < T");
    if (j.contains("problem")) {
        const auto& p = j["problem"];
        if (p.contains("u0")) sc.u0_kind = p["u0"].get<std::string>();
        if (p.contains("u0_param")) sc.u0_param = p["u0_param"].get<double>();
        if (p.contains("lambda_const")) sc.lambda_const = p["lambda_const"].get<double>();
    }
    expect(sc.u0_kind == "sin" || sc.u0_kind == "bump" || sc.u0_kind == "const",
           "problem.u0 must be sin|bump|const");
    if (j.contains("checks"))
        for (const auto& c : j["checks"]) sc.checks.push_back(c.get<std::string>());
    for (const auto& c : sc.checks) {
        bool ok = false;
        for (const auto& k : known_checks()) ok = ok || k == c;
        expect(ok, "unknown check: " + c);
    }
    if (const char* env = std::getenv("IRRDRIFT_SEED")) {
        sc.seed = std::strtoull(env, nullptr, 10);
        sc.seed_overridden = true;
    }
    return sc;
}

inline std::uint64_t scenario_hash(const Scenario& sc) {
    std::string s = sc.canonical().dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Materialized scenario: coefficients, maps, problem, lazily built.

struct Context {
    Scenario sc;
    scale::CoefficientPair coeffs;
    scale::SigmaResult sigma;
    scale::ScaleMaps maps;
    pde::CauchyProblem problem;
    std::optional<noise::Environment> env;

    static Context build(const Scenario& sc) {
        Context ctx;
        ctx.sc = sc;
        std::size_t n = sc.n_points % 2 == 0 ? sc.n_points + 1 : sc.n_points;  // keep 0 on the grid
        double L = sc.L;
        auto& c = ctx.coeffs;
        if (sc.coeff_kind == "heat") {
            c.sigma = GridFunction::constant(-L, L, n, 1.0);
            c.b = GridFunction::constant(-L, L, n, 0.0);
            c.route = scale::CoefficientPair::Route::sigma_bv;
            c.smooth = true;
        } else if (sc.coeff_kind == "smooth_sin") {
            c.sigma = GridFunction::constant(-L, L, n, 1.0);
            c.b = GridFunction::sample(-L, L, n, [](double x) { return std::sin(x); });
            c.route = scale::CoefficientPair::Route::sigma_bv;
            c.smooth = true;
        } else if (sc.coeff_kind == "divergence") {
            c.sigma = GridFunction::sample(-L, L, n,
                                           [](double x) { return std::sqrt(2.0 + std::sin(x)); });
            c.b = GridFunction::sample(-L, L, n, [](double x) { return 0.5 * std::sin(x); });
            c.route = scale::CoefficientPair::Route::close_to_divergence;
            c.smooth = true;
        } else if (sc.coeff_kind == "environment") {
            ctx.env = noise::gen_environment(sc.env_seed, sc.hurst, L, n);
            c.sigma = GridFunction::constant(-L, L, ctx.env->path.size(), 1.0);
            c.b = ctx.env->path;
            c.route = scale::CoefficientPair::Route::sigma_bv;
            c.smooth = false;
        } else {  // csv
            c.sigma = io::read_grid_function(sc.sigma_csv);
            c.b = io::read_grid_function(sc.b_csv);
            c.route = scale::CoefficientPair::Route::sigma_bv;
            c.smooth = false;
        }
        ctx.sigma = scale::compute_sigma_big(c);
        ctx.maps = scale::build_scale_maps(c, ctx.sigma.sigma_big);
        ctx.problem.coeffs = c;
        ctx.problem.maps = ctx.maps;
        double width = sc.u0_param;
        if (sc.u0_kind == "sin") {
            ctx.problem.u0 = GridFunction::sample(c.sigma.x_min(), c.sigma.x_max(), c.sigma.size(),
                                                  [&](double x) { return std::sin(width * x); });
        } else if (sc.u0_kind == "bump") {
            ctx.problem.u0 = GridFunction::sample(c.sigma.x_min(), c.sigma.x_max(), c.sigma.size(),
                                                  [&](double x) {
                                                      double z = x / width;
                                                      return std::exp(-z * z);
                                                  });
        } else {
            ctx.problem.u0 =
                GridFunction::constant(c.sigma.x_min(), c.sigma.x_max(), c.sigma.size(), width);
        }
        ctx.problem.lambda = pde::SpaceTimeFunction::constant(sc.lambda_const, ctx.problem.u0, sc.T);
        ctx.problem.T = sc.T;
        return ctx;
    }

    sde::SdeRun make_run(double x0, std::uint64_t salt,
                         sde::SdeRun::Method m = sde::SdeRun::Method::euler_on_y) const {
        sde::SdeRun run;
        run.maps = maps;
        run.coeffs = coeffs;
        run.x0 = x0;
        run.T = sc.T;
        run.dt = sc.dt;
        run.n_paths = sc.n_paths;
        run.seed = rng::sub_seed(sc.seed, salt);
        run.method = m;
        return run;
    }

    std::vector<double> probes() const {
        double w = sc.L / 4.0;
        return {-w, -w / 2.0, 0.0, w / 2.0, w};
    }
};

}  // namespace irrdrift::cli
