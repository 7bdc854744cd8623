#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "irrdrift/pde.hpp"

using namespace irrdrift;
using namespace irrdrift::pde;
using scale::CoefficientPair;

namespace {

CoefficientPair heat_pair(std::size_t n = 1201, double L = 6.0) {
    CoefficientPair c;
    c.sigma = GridFunction::constant(-L, L, n, 1.0);
    c.b = GridFunction::constant(-L, L, n, 0.0);
    c.route = CoefficientPair::Route::sigma_bv;
    c.smooth = true;
    return c;
}

CoefficientPair div_pair(std::size_t n = 2001, double L = 6.0) {
    CoefficientPair c;
    c.sigma = GridFunction::sample(-L, L, n, [](double x) { return std::sqrt(2.0 + std::sin(x)); });
    c.b = GridFunction::sample(-L, L, n, [](double x) { return 0.5 * std::sin(x); });
    c.route = CoefficientPair::Route::close_to_divergence;
    c.smooth = true;
    return c;
}

CauchyProblem make_problem(CoefficientPair c, const std::function<double(double)>& u0,
                           double lambda_const, double T) {
    CauchyProblem p;
    p.maps = scale::build_scale_maps(c, scale::compute_sigma_big(c).sigma_big);
    p.coeffs = std::move(c);
    p.u0 = GridFunction::sample(p.coeffs.sigma.x_min(), p.coeffs.sigma.x_max(),
                                p.coeffs.sigma.size(), u0);
    p.lambda = SpaceTimeFunction::constant(lambda_const, p.u0, T);
    p.T = T;
    return p;
}

}  // namespace

TEST_CASE("constant terminal datum is preserved (conservativeness)") {
    auto p = make_problem(heat_pair(), [](double) { return 1.0; }, 0.0, 1.0);
    auto mc = solve_mc(p, 0.0, {0.0, 0.7}, 2000, 5, 2e-3);
    for (std::size_t q = 0; q < mc.u.size(); ++q) {
        CHECK(mc.exit_fraction[q] < 0.01);
        CHECK(mc.u[q] == Catch::Approx(1.0).margin(3 * mc.se[q] + 1e-12));
    }
    auto fd = solve_fd(p, 0.0);
    for (std::size_t i = 0; i < fd.at_s().size(); ++i)
        CHECK(fd.at_s().value(i) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("heat closed form e^{-(T-s)/2} sin x") {
    auto p = make_problem(heat_pair(), [](double x) { return std::sin(x); }, 0.0, 1.0);
    double exact = std::exp(-0.5) * std::sin(0.5);
    SECTION("monte carlo within 3 SE") {
        auto mc = solve_mc(p, 0.0, {0.5}, 20000, 9, 1e-3);
        CHECK(mc.u[0] == Catch::Approx(exact).margin(3 * mc.se[0] + 1e-6));
    }
    SECTION("finite differences within 1e-3 at interior points") {
        auto fd = solve_fd(p, 0.0);
        for (double x : {-1.5, -0.5, 0.0, 0.5, 1.5})
            CHECK(fd.at_s()(x) == Catch::Approx(std::exp(-0.5) * std::sin(x)).margin(1e-3));
    }
}

TEST_CASE("source sign convention: lambda = 1, u0 = 0 gives u = -(T-s)") {
    auto p = make_problem(heat_pair(), [](double) { return 0.0; }, 1.0, 1.0);
    auto fd = solve_fd(p, 0.0);
    CHECK(fd.at_s()(0.3) == Catch::Approx(-1.0).margin(1e-9));
    auto mc = solve_mc(p, 0.25, {0.0}, 500, 3, 2e-3);
    CHECK(mc.u[0] == Catch::Approx(-0.75).margin(3 * mc.se[0] + 1e-9));
}

TEST_CASE("solver agreement on the divergence preset") {
    auto p = make_problem(div_pair(), [](double x) { return std::exp(-x * x); }, 0.0, 1.0);
    auto fd = solve_fd(p, 0.0);
    auto mc = solve_mc(p, 0.0, {-1.0, -0.5, 0.0, 0.5, 1.0}, 20000, 17, 1e-3);
    double range = fd.at_s().max_value() - fd.at_s().min_value();
    for (std::size_t q = 0; q < mc.u.size(); ++q) {
        double tol = std::max(3 * mc.se[q], 0.02 * range);
        CHECK(mc.u[q] == Catch::Approx(fd.at_s()(mc.x[q])).margin(tol));
    }
}

TEST_CASE("transform compatibility: k-coordinate solve agrees with h-coordinate solve") {
    auto p = make_problem(div_pair(), [](double x) { return std::exp(-x * x); }, 0.0, 1.0);
    auto fh = solve_fd(p, 0.0, FdCoords::h_transform);
    auto fk = solve_fd(p, 0.0, FdCoords::k_divergence);
    double range = fh.at_s().max_value() - fh.at_s().min_value();
    for (double x : {-1.0, -0.5, 0.0, 0.5, 1.0})
        CHECK(std::abs(fh.at_s()(x) - fk.at_s()(x)) < 0.02 * range);
}

TEST_CASE("maximum principle assertion and stability guard") {
    auto p = make_problem(heat_pair(601, 6.0), [](double x) { return std::sin(3 * x); }, 0.0, 1.0);
    CHECK_NOTHROW(solve_fd(p, 0.0, FdCoords::h_transform, 128));
    CHECK_THROWS_AS(solve_fd(p, 0.0, FdCoords::h_transform, 2, 10.0), std::runtime_error);
}

TEST_CASE("gaussian kernel matches the closed form within KDE tolerance") {
    auto c = heat_pair(801, 6.0);
    auto maps = scale::build_scale_maps(c, scale::compute_sigma_big(c).sigma_big);
    auto target = GridFunction::sample(-6.0, 6.0, 241, [](double) { return 0.0; });
    auto est = estimate_kernel(c, maps, 1.0, {0.0}, 20000, 0.0, 13, target, 2e-3);
    REQUIRE(est.rows.size() == 1);
    double bw = est.bandwidths[0];
    for (std::size_t i = 0; i < est.rows[0].size(); ++i) {
        if (est.counts[0].value(i) < 50) continue;
        double y = est.rows[0].node(i);
        double truth = std::exp(-0.5 * y * y) / 2.5066282746310005;
        double bias = 0.5 * bw * bw * std::abs(truth * (y * y - 1.0));  // h^2 |rho''|/2
        double tol = 3.0 * kde_se(truth, est.n_paths, bw) + bias + 1e-4;
        CHECK(est.rows[0].value(i) == Catch::Approx(truth).margin(tol));
    }
}

TEST_CASE("divergence-form kernel symmetry and change of variable (Lemma L5.1(viii), Remark RCV)") {
    auto c = div_pair(2001, 6.0);
    auto maps = scale::build_scale_maps(c, scale::compute_sigma_big(c).sigma_big);
    double x1 = 0.4, x2 = -0.6;
    // k = x/2 for this preset; z-space estimate of r on the k-image grid
    auto ztarget = GridFunction::sample(-3.0, 3.0, 241, [](double) { return 0.0; });
    auto xtarget = GridFunction::sample(-6.0, 6.0, 241, [](double) { return 0.0; });

    // r rows: KDE of Z = k(X_t) via simulating X and mapping
    auto z_kernel_row = [&](double x0, std::uint64_t seed) {
        sde::SdeRun run;
        run.maps = maps;
        run.coeffs = c;
        run.x0 = x0;
        run.T = 1.0;
        run.dt = 1e-3;
        run.n_paths = 20000;
        run.seed = seed;
        auto law = sde::terminal_law(run);
        std::vector<double> z;
        z.reserve(law.terminals.size());
        for (double v : law.terminals) z.push_back(maps.k(v));
        double bw = pde::detail::silverman_bandwidth(z);
        return std::pair{pde::detail::kde(z, run.n_paths, bw, ztarget), bw};
    };
    auto [row1, bw1] = z_kernel_row(x1, 101);
    auto [row2, bw2] = z_kernel_row(x2, 102);
    double z1 = maps.k(x1), z2 = maps.k(x2);
    double v12 = row1(z2), v21 = row2(z1);
    double tol = 3.0 * (kde_se(v12, 20000, bw1) + kde_se(v21, 20000, bw2)) + 0.5 * (bw1 * bw1 + bw2 * bw2) + 1e-3;
    CHECK(v12 == Catch::Approx(v21).margin(tol));

    // change of variable: p_t(x, y) = r_t(k(x), k(y)) k'(y)
    auto est = estimate_kernel(c, maps, 1.0, {x1}, 20000, 0.0, 103, xtarget, 1e-3);
    for (double y : {-0.8, 0.0, 0.9}) {
        double lhs = est.rows[0](y);
        double kp = std::exp(maps.Sigma(y)) / (c.sigma(y) * c.sigma(y));
        double rhs = row1(maps.k(y)) * kp;
        double tol2 = 3.0 * (kde_se(lhs, 20000, est.bandwidths[0]) +
                             kde_se(rhs, 20000, bw1) * kp) +
                      0.5 * (est.bandwidths[0] * est.bandwidths[0] + bw1 * bw1) + 1e-3;
        CHECK(lhs == Catch::Approx(rhs).margin(tol2));
    }
}

TEST_CASE("aronson sandwich") {
    SECTION("gaussian case: feasible with small M") {
        auto c = heat_pair(801, 6.0);
        auto maps = scale::build_scale_maps(c, scale::compute_sigma_big(c).sigma_big);
        auto target = GridFunction::sample(-6.0, 6.0, 241, [](double) { return 0.0; });
        auto est = estimate_kernel(c, maps, 1.0, {0.0}, 20000, 0.0, 23, target, 2e-3);
        auto chk = aronson_check(est);
        CHECK(chk.feasible);
        CHECK(chk.M <= 4.0);
    }
    SECTION("corrupted kernel is infeasible on the lower bound") {
        auto c = heat_pair(801, 6.0);
        auto maps = scale::build_scale_maps(c, scale::compute_sigma_big(c).sigma_big);
        auto target = GridFunction::sample(-6.0, 6.0, 241, [](double) { return 0.0; });
        auto est = estimate_kernel(c, maps, 1.0, {0.0}, 20000, 0.0, 23, target, 2e-3);
        // zero out a well-populated stretch of the estimated density
        std::vector<double> v = est.rows[0].values();
        for (std::size_t i = 0; i < v.size(); ++i)
            if (est.counts[0].value(i) >= 50 && est.rows[0].node(i) > 0.5) v[i] = 0.0;
        est.rows[0] = GridFunction(-6.0, 6.0, v);
        CHECK_FALSE(aronson_check(est).feasible);
    }
}

TEST_CASE("kernel representation reproduces the MC solution for lambda = 0") {
    auto c = heat_pair(801, 6.0);
    auto maps = scale::build_scale_maps(c, scale::compute_sigma_big(c).sigma_big);
    auto p = make_problem(heat_pair(801, 6.0), [](double x) { return std::sin(x); }, 0.0, 1.0);
    auto target = GridFunction::sample(-6.0, 6.0, 601, [](double) { return 0.0; });
    auto est = estimate_kernel(c, maps, 1.0, {0.5}, 20000, 0.0, 31, target, 1e-3);
    // quadrature of u0 against the kernel row
    double val = 0;
    for (std::size_t i = 0; i + 1 < target.size(); ++i) {
        double y0 = target.node(i), y1 = target.node(i + 1);
        val += 0.5 * (std::sin(y0) * est.rows[0].value(i) + std::sin(y1) * est.rows[0].value(i + 1)) *
               (y1 - y0);
    }
    auto mc = solve_mc(p, 0.0, {0.5}, 20000, 37, 1e-3);
    CHECK(val == Catch::Approx(mc.u[0]).margin(3 * mc.se[0] + 0.01));
}

TEST_CASE("mc solver flags high-exit sources") {
    auto p = make_problem(heat_pair(301, 1.0), [](double) { return 1.0; }, 0.0, 1.0);
    auto mc = solve_mc(p, 0.0, {0.0}, 500, 7, 2e-3);
    CHECK(mc.exit_fraction[0] > 0.2);
    CHECK(mc.warn[0]);
}
