#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "irrdrift/noise.hpp"
#include "irrdrift/scale.hpp"

using namespace irrdrift;
using namespace irrdrift::scale;

namespace {

constexpr std::size_t kN = 4001;
constexpr double kL = 4.0;

CoefficientPair trivial_pair() {
    CoefficientPair c;
    c.sigma = GridFunction::constant(-kL, kL, kN, 1.0);
    c.b = GridFunction::constant(-kL, kL, kN, 0.0);
    c.route = CoefficientPair::Route::sigma_bv;
    c.smooth = true;
    return c;
}

CoefficientPair smooth_sin_pair(CoefficientPair::Route route = CoefficientPair::Route::sigma_bv) {
    CoefficientPair c;
    c.sigma = GridFunction::constant(-kL, kL, kN, 1.0);
    c.b = GridFunction::sample(-kL, kL, kN, [](double x) { return std::sin(x); });
    c.route = route;
    c.smooth = true;
    return c;
}

CoefficientPair divergence_pair() {
    CoefficientPair c;
    c.sigma = GridFunction::sample(-kL, kL, kN, [](double x) { return std::sqrt(2.0 + std::sin(x)); });
    c.b = GridFunction::sample(-kL, kL, kN, [](double x) { return 0.5 * std::sin(x); });
    c.route = CoefficientPair::Route::close_to_divergence;
    c.alpha = 1.0;
    c.smooth = true;
    return c;
}

CoefficientPair linear_drift_pair() {
    CoefficientPair c;
    c.sigma = GridFunction::constant(-2.0, 2.0, kN, 1.0);
    c.b = GridFunction::sample(-2.0, 2.0, kN, [](double x) { return x; });
    c.route = CoefficientPair::Route::sigma_bv;
    c.smooth = true;
    return c;
}

double sup_diff(const GridFunction& a, const GridFunction& b, double lo, double hi) {
    double worst = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double x = a.node(i);
        if (x < lo || x > hi) continue;
        worst = std::max(worst, std::abs(a.value(i) - b(x)));
    }
    return worst;
}

}  // namespace

TEST_CASE("Sigma trivial and closed-form cases") {
    SECTION("sigma = 1, b = 0 gives Sigma = 0") {
        auto r = compute_sigma_big(trivial_pair());
        CHECK(r.sigma_big.max_abs() < 1e-14);
    }
    SECTION("sigma = 1, b = sin gives Sigma = 2 sin") {
        auto r = compute_sigma_big(smooth_sin_pair());
        CHECK(r.sigma_big(1.5707963267948966) == Catch::Approx(2.0).margin(1e-4));
        auto exact = GridFunction::sample(-kL, kL, kN, [](double x) { return 2.0 * std::sin(x); });
        CHECK(sup_diff(r.sigma_big, exact, -kL, kL) < 1e-6);
    }
    SECTION("close-to-divergence: Sigma = log(sigma^2/sigma^2(0))") {
        auto r = compute_sigma_big(divergence_pair());
        CHECK(r.sigma_big(1.5707963267948966) == Catch::Approx(std::log(1.5)).margin(1e-4));
    }
}

TEST_CASE("Sigma route consistency on a smooth drift (Prop T24)") {
    auto base = compute_sigma_big(smooth_sin_pair()).sigma_big;  // 2 sin x, exact route
    auto smooth = compute_sigma_big(smooth_sin_pair(CoefficientPair::Route::smooth_drift)).sigma_big;
    CHECK(sup_diff(base, smooth, -2.0, 2.0) < 1e-2);
    for (auto kind : {Mollifier::Kind::gaussian, Mollifier::Kind::compact_bump}) {
        auto mol = compute_sigma_big(smooth_sin_pair(CoefficientPair::Route::mollifier_limit), kind);
        CHECK_FALSE(mol.sweep.deltas.empty());
        CHECK(mol.sweep.deltas.back() < mol.sweep.deltas.front());  // Cauchy trend
        CHECK(sup_diff(base, mol.sigma_big, -2.0, 2.0) < 1e-2);
    }
    // mollifier independence: the two kinds agree with each other as well
    auto g = compute_sigma_big(smooth_sin_pair(CoefficientPair::Route::mollifier_limit),
                               Mollifier::Kind::gaussian).sigma_big;
    auto c = compute_sigma_big(smooth_sin_pair(CoefficientPair::Route::mollifier_limit),
                               Mollifier::Kind::compact_bump).sigma_big;
    CHECK(sup_diff(g, c, -2.0, 2.0) < 1e-2);
}

TEST_CASE("Sigma routes on an fBm environment: Cauchy sweep, gap shrinks at the n^-H rate") {
    auto env = noise::gen_environment(2025, 0.4, 2.0, 4097);
    CoefficientPair c;
    c.sigma = GridFunction::constant(-2.0, 2.0, env.path.size(), 1.0);
    c.b = env.path;
    c.route = CoefficientPair::Route::holder_young;
    c.gamma_exp = 0.9;  // 1/sigma^2 is constant
    c.beta_exp = 0.35;
    auto young = compute_sigma_big(c);
    CHECK_FALSE(young.unreliable);
    // with sigma = 1 the Young route is exactly 2(b - b(0))
    auto exact = env.path.map([](double v) { return 2.0 * v; });
    CHECK(sup_diff(young.sigma_big, exact, -2.0, 2.0) < 1e-6);

    c.route = CoefficientPair::Route::mollifier_limit;
    std::vector<unsigned> ns = {8, 16, 32, 64};
    auto mol = compute_sigma_big(c, Mollifier::Kind::compact_bump, ns);
    for (std::size_t i = 1; i < mol.sweep.deltas.size(); ++i)
        CHECK(mol.sweep.deltas[i] <= mol.sweep.deltas[i - 1] * 1.05);
    // cross-route gap is mollification error of the environment itself:
    // bounded by 4 N_H(b) E|y|^H n^-H, decreasing in n
    double gap = sup_diff(mol.sigma_big, young.sigma_big, -2.0, 2.0);
    double nh = holder_norm(env.path, 0.4, -2.0, 2.0).norm;
    CHECK(gap <= 4.0 * nh * std::pow(1.0 / 64.0, 0.4));
    std::vector<unsigned> small_ns = {8, 16};
    auto mol_small = compute_sigma_big(c, Mollifier::Kind::compact_bump, small_ns);
    CHECK(gap < sup_diff(mol_small.sigma_big, young.sigma_big, -2.0, 2.0));
}

TEST_CASE("scale maps: trivial, linear drift, divergence") {
    SECTION("b = 0, sigma = 1: h = k = id, transformed coefficient 1") {
        auto c = trivial_pair();
        auto m = build_scale_maps(c, compute_sigma_big(c).sigma_big);
        auto id = GridFunction::sample(-kL, kL, kN, [](double x) { return x; });
        CHECK(sup_diff(m.h, id, -kL, kL) < 1e-12);
        CHECK(sup_diff(m.k, id, -kL, kL) < 1e-12);
        CHECK(std::abs(m.sigma_h_tilde.min_value() - 1.0) < 1e-12);
        CHECK(std::abs(m.sigma_h_tilde.max_value() - 1.0) < 1e-12);
    }
    SECTION("sigma = 1, b = x: h = (1 - e^{-2x})/2 and sigma_h~(y) = 1 - 2y") {
        auto c = linear_drift_pair();
        auto sig = compute_sigma_big(c).sigma_big;  // 2x
        CHECK(sig(1.0) == Catch::Approx(2.0).margin(1e-9));
        auto m = build_scale_maps(c, sig);
        CHECK(m.h(0.0) == 0.0);
        CHECK(m.h_prime(0.0) == 1.0);
        CHECK(m.h(1.0) == Catch::Approx(0.432332).margin(1e-4));
        double worst = 0;
        for (std::size_t i = 0; i < m.sigma_h_tilde.size(); ++i) {
            double y = m.sigma_h_tilde.node(i);
            worst = std::max(worst, std::abs(m.sigma_h_tilde.value(i) - (1.0 - 2.0 * y)));
        }
        CHECK(worst < 1e-3);
    }
    SECTION("divergence case: k' = 1/sigma^2(0) so k = x/2") {
        auto c = divergence_pair();
        auto m = build_scale_maps(c, compute_sigma_big(c).sigma_big);
        CHECK(m.k(1.0) == Catch::Approx(0.5).margin(1e-6));
        CHECK(m.k(-3.0) == Catch::Approx(-1.5).margin(1e-6));
    }
}

TEST_CASE("H o k = h (normalizer identity from Prop P313's proof)") {
    for (auto* make : {+[] { return smooth_sin_pair(); }, +[] { return divergence_pair(); }}) {
        auto c = make();
        auto m = build_scale_maps(c, compute_sigma_big(c).sigma_big);
        auto H = divergence_normalizer(m);
        auto Hk = compose(H, m.k);
        double tol = 2.0 * (H.interpolation_tolerance() + m.h.interpolation_tolerance()) + 5e-5;
        CHECK(sup_diff(Hk, m.h, -kL, kL) <= tol);
    }
}

TEST_CASE("feasibility diagnostics") {
    SECTION("trivial pair passes both sides, c = C = 1") {
        auto c = trivial_pair();
        auto rep = feasibility(c, compute_sigma_big(c).sigma_big);
        CHECK(rep.nonexplosion_left);
        CHECK(rep.nonexplosion_right);
        CHECK(rep.aronson_c == Catch::Approx(1.0));
        CHECK(rep.aronson_C == Catch::Approx(1.0));
        CHECK(rep.aronson_ok);
    }
    SECTION("sigma = 1, b = x: nonexplosion fails (a convergent integral on each side)") {
        // right: int e^{-2x} converges; left: int e^{2x}/sigma^2 converges
        auto c = linear_drift_pair();
        auto rep = feasibility(c, compute_sigma_big(c).sigma_big);
        CHECK_FALSE(rep.nonexplosion_right);
        CHECK_FALSE(rep.nonexplosion_left);
    }
    SECTION("divergence case: c = C = 1/2") {
        auto c = divergence_pair();
        auto rep = feasibility(c, compute_sigma_big(c).sigma_big);
        CHECK(rep.aronson_c == Catch::Approx(0.5).margin(1e-6));
        CHECK(rep.aronson_C == Catch::Approx(0.5).margin(1e-6));
        CHECK(rep.aronson_ok);
    }
}

TEST_CASE("solution operator T") {
    SECTION("Sigma = 0, sigma = 1, ell = y, x1 = 0: f = x^2") {
        auto c = trivial_pair();
        auto m = build_scale_maps(c, compute_sigma_big(c).sigma_big);
        auto ell = GridFunction::sample(-kL, kL, kN, [](double x) { return x; });
        auto r = apply_T(ell, m, c, 0.0);
        CHECK(r.f(1.0) == Catch::Approx(1.0).margin(1e-4));
        CHECK(r.f(-1.5) == Catch::Approx(2.25).margin(1e-4));
    }
    SECTION("T^1 b = id on the smooth preset") {
        auto c = smooth_sin_pair();
        auto m = build_scale_maps(c, compute_sigma_big(c).sigma_big);
        auto r = apply_T(c.b, m, c, 1.0);
        auto id = GridFunction::sample(-kL, kL, kN, [](double x) { return x; });
        CHECK(sup_diff(r.f, id, -1.0, 1.0) < 1e-3);
    }
    SECTION("ell = 0, x1 = 1 reproduces h") {
        auto c = smooth_sin_pair();
        auto m = build_scale_maps(c, compute_sigma_big(c).sigma_big);
        auto zero = GridFunction::constant(-kL, kL, kN, 0.0);
        auto r = apply_T(zero, m, c, 1.0);
        CHECK(sup_diff(r.f, m.h, -kL, kL) < 1e-12);
    }
    SECTION("closed-form route agrees with quadrature route on C^1 data") {
        auto c = divergence_pair();
        auto m = build_scale_maps(c, compute_sigma_big(c).sigma_big);
        auto ell = GridFunction::sample(-kL, kL, kN, [](double x) { return std::sin(x); });
        auto quad = apply_T(ell, m, c, 0.0, TRoute::c1_quadrature);
        auto closed = apply_T(ell, m, c, 0.0, TRoute::close_to_divergence_closed_form);
        CHECK(sup_diff(quad.f, closed.f, -2.0, 2.0) < 1e-3);
    }
    SECTION("young route agrees with quadrature route on the smooth preset") {
        auto c = smooth_sin_pair();
        c.gamma_exp = 0.9;
        c.beta_exp = 0.9;
        auto m = build_scale_maps(c, compute_sigma_big(c).sigma_big);
        auto quad = apply_T(c.b, m, c, 0.0, TRoute::c1_quadrature);
        auto young = apply_T(c.b, m, c, 0.0, TRoute::young);
        CHECK_FALSE(young.unreliable);
        CHECK(sup_diff(quad.f, young.f, -2.0, 2.0) < 1e-3);
    }
    SECTION("classical residual of Lemma T27 shrinks with the mesh") {
        auto resid_at = [](std::size_t n) {
            CoefficientPair c;
            c.sigma = GridFunction::constant(-kL, kL, n, 1.0);
            c.b = GridFunction::sample(-kL, kL, n, [](double x) { return std::sin(x); });
            c.route = CoefficientPair::Route::sigma_bv;
            auto m = build_scale_maps(c, compute_sigma_big(c).sigma_big);
            auto ell = GridFunction::sample(-kL, kL, n, [](double x) { return std::cos(x); });
            auto r = apply_T(ell, m, c, 0.0);
            // sigma^2 f''/2 + b' f' - ell' on the interior
            auto fpp = second_derivative(r.f);
            auto fp = derivative(r.f);
            double worst = 0;
            for (std::size_t i = 0; i < fpp.size(); ++i) {
                double x = fpp.node(i);
                if (std::abs(x) > 2.0) continue;
                double res = 0.5 * fpp.value(i) + std::cos(x) * fp.value(i) + std::sin(x);
                worst = std::max(worst, std::abs(res));
            }
            return worst;
        };
        double r1 = resid_at(2001), r2 = resid_at(4001);
        CHECK(r1 < 0.01);
        CHECK(r2 < 0.75 * r1);
    }
}

TEST_CASE("hat L anchors") {
    auto c = smooth_sin_pair();
    SECTION("hat L id = b to round-off") {
        auto id = GridFunction::sample(-kL, kL, kN, [](double x) { return x; });
        auto lid = hat_L(id, c);
        CHECK(sup_diff(lid, c.b, -kL, kL) < 1e-9);
    }
    SECTION("hat L h vanishes on the smooth preset") {
        auto m = build_scale_maps(c, compute_sigma_big(c).sigma_big);
        auto lh = hat_L(m.h, c);
        double worst = 0;
        for (std::size_t i = 0; i < lh.size(); ++i)
            worst = std::max(worst, std::abs(lh.value(i)));
        CHECK(worst < 1e-3);
    }
    SECTION("classical case f = sin: quadrature oracle of int_0^x L f") {
        // L f = -sin/2 + cos^2 for sigma = 1, b = sin; at x = pi the
        // primitive evaluates to pi/2 - 1
        auto f = GridFunction::sample(-kL, kL, kN, [](double x) { return std::sin(x); });
        auto lf = hat_L(f, c);
        auto oracle_fn = GridFunction::sample(-kL, kL, kN, [](double x) {
            return -0.5 * std::sin(x) + std::cos(x) * std::cos(x);
        });
        auto oracle = cumulative_trapezoid(oracle_fn, 0.0);
        CHECK(sup_diff(lf, oracle, -kL, kL) < 1e-3);
        double pi = 3.14159265358979323846;
        CHECK(lf(pi) == Catch::Approx(pi / 2.0 - 1.0).margin(1e-3));
    }
    SECTION("hat L T acts as the identity on anchored C^1 data (Lemma L2.21(e))") {
        auto m = build_scale_maps(c, compute_sigma_big(c).sigma_big);
        auto ell = GridFunction::sample(-kL, kL, kN,
                                        [](double x) { return std::cos(x) - 1.0; });  // ell(0) = 0
        auto f = apply_T(ell, m, c, 0.0);
        auto lf = hat_L(f.f, c);
        CHECK(sup_diff(lf, ell, -2.0, 2.0) < 1e-3);
    }
}

TEST_CASE("phi bilinear map") {
    auto g1 = GridFunction::constant(-1.0, 1.0, 1001, 1.0);
    auto ell = GridFunction::sample(-1.0, 1.0, 1001, [](double x) { return std::cos(x); });
    auto p1 = phi_bilinear(g1, ell);
    double worst = 0;
    for (std::size_t i = 0; i < p1.size(); ++i)
        worst = std::max(worst, std::abs(p1.value(i) - (ell.value(i) - std::cos(0.0))));
    CHECK(worst < 1e-12);

    auto ell1 = GridFunction::constant(-1.0, 1.0, 1001, 1.0);
    auto g = GridFunction::sample(-1.0, 1.0, 1001, [](double x) { return std::exp(x); });
    CHECK(phi_bilinear(g, ell1).max_abs() < 1e-5);

    auto idf = GridFunction::sample(-1.0, 1.0, 1001, [](double x) { return x; });
    auto p3 = phi_bilinear(idf, idf);
    CHECK(p3(1.0) == Catch::Approx(0.5).margin(1e-6));
}

TEST_CASE("validation rejects bad coefficient pairs") {
    CoefficientPair c;
    c.sigma = GridFunction::constant(-1.0, 1.0, 101, 1.0);
    c.b = GridFunction::sample(-1.0, 1.0, 101, [](double x) { return x + 0.5; });  // b(0) != 0
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.b = GridFunction::sample(-1.0, 1.0, 101, [](double x) { return x; });
    c.sigma = GridFunction::sample(-1.0, 1.0, 101, [](double x) { return x; });  // not > 0
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
