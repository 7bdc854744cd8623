#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "grid_function.hpp"
#include "noise.hpp"
#include "pde.hpp"
#include "regcalc.hpp"
#include "scale.hpp"

namespace irrdrift::spde {

// Weak-solution residuals of the space-tested SPDE forms. The drift pairing
// is the definite symmetric integral against the environment; all other
// terms are trapezoid quadratures on the solver grids.

struct WeakForm {
    enum class Form { rig, dual };
    Form form = Form::dual;
    double t = 0;
    double mass_t = 0;             // int alpha u(t,.)
    double mass_0_or_T = 0;        // int alpha u0
    double diffusion_term = 0;     // (1/2) int alpha' (time-integrated d_x u)
    double drift_symmetric_term = 0;
    double source_term = 0;
    double residual = 0;           // -mass_t + mass_0_or_T - diffusion + drift - source
    double epsilon_used = 0;
    double mesh_used = 0;

    double dominant() const {
        double m = std::abs(mass_t);
        m = std::max(m, std::abs(mass_0_or_T));
        m = std::max(m, std::abs(diffusion_term));
        m = std::max(m, std::abs(drift_symmetric_term));
        m = std::max(m, std::abs(source_term));
        return m;
    }
};

namespace detail {

inline void check_test_function(const GridFunction& alpha) {
    double scale = 1e-10 * (1.0 + alpha.max_abs());
    if (std::abs(alpha.value(0)) > scale || std::abs(alpha.value(alpha.size() - 1)) > scale)
        throw std::invalid_argument("weak_residual: test function must vanish at the domain ends");
}

// int_R Y(x) (X(x+eps) - X(x-eps))/(2 eps) dx with X flat near the ends
// (integrator differences vanish outside supp Y + eps).
inline double centered_pairing(const GridFunction& Y, const GridFunction& X, double epsilon) {
    auto m = static_cast<std::ptrdiff_t>(std::llround(epsilon / Y.dx()));
    if (m < 1) m = 1;
    double eps = static_cast<double>(m) * Y.dx();
    auto clamp_at = [&](std::ptrdiff_t i) {
        if (i < 0) i = 0;
        auto n = static_cast<std::ptrdiff_t>(X.size());
        if (i >= n) i = n - 1;
        return X.value(static_cast<std::size_t>(i));
    };
    std::vector<double> g(Y.size());
    for (std::size_t i = 0; i < Y.size(); ++i) {
        auto ii = static_cast<std::ptrdiff_t>(i);
        g[i] = Y.value(i) * (clamp_at(ii + m) - clamp_at(ii - m)) / (2.0 * eps);
    }
    double s = 0.5 * (g.front() + g.back());
    for (std::size_t i = 1; i + 1 < g.size(); ++i) s += g[i];
    return s * Y.dx();
}

// time-integrated space gradient over frame range [j0, j1]
inline GridFunction time_integrated_gradient(const pde::SpaceTimeFunction& u, std::size_t j0,
                                             std::size_t j1) {
    const auto& g0 = u.frames[j0];
    std::vector<double> acc(g0.size(), 0.0);
    if (j1 <= j0) return GridFunction(g0.x_min(), g0.x_max(), std::move(acc));
    double dt = u.frame_dt();
    for (std::size_t j = j0; j <= j1; ++j) {
        auto gx = derivative(u.frames[j]);
        double wt = (j == j0 || j == j1) ? 0.5 * dt : dt;
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += wt * gx.value(i);
    }
    return GridFunction(g0.x_min(), g0.x_max(), std::move(acc));
}

inline double alpha_integral(const GridFunction& alpha, const GridFunction& f) {
    return trapezoid(zip(alpha, f, [](double a, double v) { return a * v; }));
}

inline std::size_t snap_frame(const pde::SpaceTimeFunction& u, double t) {
    double pos = t / u.frame_dt();
    auto j = static_cast<std::size_t>(std::llround(pos));
    return std::min(j, u.frames.size() - 1);
}

}  // namespace detail

// Residual of (eI-1dual) for u (frames on [0,T], frame 0 at time 0), or of
// (eI-1rig) for v = the time reversal. Both forms share the term layout:
//   -mass_t + mass_0_or_T - diffusion + drift - source.
inline WeakForm weak_residual(const pde::SpaceTimeFunction& u, WeakForm::Form form,
                              const GridFunction& alpha, double t, const GridFunction& eta,
                              const pde::SpaceTimeFunction& lambda, const GridFunction& u0,
                              double epsilon) {
    detail::check_test_function(alpha);
    if (!alpha.same_grid(u.frames[0]) || !alpha.same_grid(eta))
        throw std::invalid_argument("weak_residual: grids differ");
    WeakForm out;
    out.form = form;
    out.epsilon_used = epsilon;
    out.mesh_used = alpha.dx();
    std::size_t jt = detail::snap_frame(u, t);
    out.t = u.frame_dt() * static_cast<double>(jt);
    std::size_t last = u.frames.size() - 1;
    double T = u.T;

    GridFunction A;  // time-integrated gradient over the form's time window
    if (form == WeakForm::Form::dual) {
        A = detail::time_integrated_gradient(u, jt, last);
    } else {
        A = detail::time_integrated_gradient(u, 0, jt);
    }
    out.mass_t = detail::alpha_integral(alpha, u.frames[jt]);
    out.mass_0_or_T = detail::alpha_integral(alpha, u0);
    out.diffusion_term = 0.5 * trapezoid(zip(derivative(alpha), A,
                                             [](double da, double av) { return da * av; }));
    auto alpha_A = zip(alpha, A, [](double a, double av) { return a * av; });
    out.drift_symmetric_term = detail::centered_pairing(alpha_A, eta, epsilon);

    // source: dual integrates lambda(s,.) over [t,T]; rig integrates
    // lambda(T-s,.) over [0,t] (the same window after substitution)
    double dtau = u.frame_dt();
    double src = 0;
    if (form == WeakForm::Form::dual) {
        for (std::size_t j = jt; j <= last && jt < last; ++j) {
            double wt = (j == jt || j == last) ? 0.5 * dtau : dtau;
            double ti = dtau * static_cast<double>(j);
            auto lam = GridFunction::sample(alpha.x_min(), alpha.x_max(), alpha.size(),
                                            [&](double x) { return lambda(ti, x); });
            src += wt * detail::alpha_integral(alpha, lam);
        }
    } else {
        for (std::size_t j = 0; j <= jt && jt > 0; ++j) {
            double wt = (j == 0 || j == jt) ? 0.5 * dtau : dtau;
            double ti = T - dtau * static_cast<double>(j);
            auto lam = GridFunction::sample(alpha.x_min(), alpha.x_max(), alpha.size(),
                                            [&](double x) { return lambda(ti, x); });
            src += wt * detail::alpha_integral(alpha, lam);
        }
    }
    out.source_term = src;
    out.residual = -out.mass_t + out.mass_0_or_T - out.diffusion_term +
                   out.drift_symmetric_term - out.source_term;
    return out;
}

// v(t, .) = u(T-t, .): exact time reversal on the (uniform) frame set.
inline pde::SpaceTimeFunction dual_transform(const pde::SpaceTimeFunction& u) {
    pde::SpaceTimeFunction v = u;
    std::reverse(v.frames.begin(), v.frames.end());
    return v;
}

// Identity of Lemma Lspdes, with the sign consistent with the weak forms:
//   int alpha (u(t,.) - u0 + int_t^T lambda) dx
//     = - int e^Sigma (int_t^T d_x u) d^o( alpha (sigma^2/2) e^{-Sigma} ).
// Returns (lhs, rhs) at the given regularization.
inline std::pair<double, double> lspdes_identity(const pde::SpaceTimeFunction& u,
                                                 const GridFunction& alpha,
                                                 const pde::SpaceTimeFunction& lambda,
                                                 const GridFunction& u0, double t,
                                                 const GridFunction& sigma,
                                                 const GridFunction& sigma_big, double epsilon) {
    detail::check_test_function(alpha);
    std::size_t jt = detail::snap_frame(u, t);
    std::size_t last = u.frames.size() - 1;
    double dtau = u.frame_dt();

    std::vector<double> inner(alpha.size(), 0.0);
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        double x = alpha.node(i);
        double lam_acc = 0;
        for (std::size_t j = jt; j <= last && jt < last; ++j) {
            double wt = (j == jt || j == last) ? 0.5 * dtau : dtau;
            lam_acc += wt * lambda(dtau * static_cast<double>(j), x);
        }
        inner[i] = u.frames[jt].value(i) - u0.value(i) + lam_acc;
    }
    double lhs = detail::alpha_integral(alpha, GridFunction(alpha.x_min(), alpha.x_max(), inner));

    auto A = detail::time_integrated_gradient(u, jt, last);
    auto Y = zip(A, sigma_big, [](double a, double s) { return a * std::exp(s); });
    auto X = zip(zip(alpha, sigma, [](double a, double sg) { return 0.5 * a * sg * sg; }), sigma_big,
                 [](double as, double s) { return as * std::exp(-s); });
    double rhs = -detail::centered_pairing(Y, X, epsilon);
    return {lhs, rhs};
}

// ---------------------------------------------------------------------------
// End-to-end pipeline for fBm environments (sigma = 1).

struct SpdeScenario {
    std::uint64_t env_seed = 1;
    double hurst = 0.5;   // >= 1/3 enforced
    double L = 2.0;
    std::size_t n_finest = 2049;  // 2^k + 1
    double T = 1.0;
    double u0_width = 1.0;        // terminal datum: exp(-(x/width)^2)
    double lambda_const = 0.0;
    std::size_t stages = 4;
    std::size_t time_steps_finest = 256;
    double eps_over_dx = 16.0;
    std::size_t n_times = 3;   // residual evaluation times T/4, T/2, 3T/4
};

struct SpdeStage {
    double dx = 0;
    double epsilon = 0;
    std::vector<WeakForm> forms;      // one per (alpha, t)
    double max_rel_residual = 0;      // max |residual| / dominant
};

struct SpdeReport {
    bool env_ok = false;
    regcalc::EpsilonSweep cubic_certificate;       // terminal cubic variation of eta
    std::vector<double> strong_norms;              // per sweep stage
    scale::FeasibilityReport feasibility;
    std::vector<SpdeStage> stages;                 // coarse -> fine
    double duality_gap = 0;                        // |rig(v) - dual(u)| at fixed discretization
    double final_max_rel_residual = 0;
};

inline SpdeReport run_spde_pipeline(const SpdeScenario& sc) {
    if (sc.hurst < 1.0 / 3.0 - 1e-12)
        throw std::invalid_argument("run_spde_pipeline: hurst < 1/3 violates the standing hypothesis");
    if (((sc.n_finest - 1) & (sc.n_finest - 2)) != 0)
        throw std::invalid_argument("run_spde_pipeline: n_finest must be 2^k + 1");

    SpdeReport rep;
    auto env = noise::gen_environment(sc.env_seed, sc.hurst, sc.L, sc.n_finest, true);
    rep.env_ok = env.spde_ok;

    // stage 1: certify eta as a (strong) zero cubic variation process
    SamplePath eta_path = SamplePath::deterministic_path(-sc.L, env.path.dx(), env.path.values());
    double eps0 = 64.0 * env.path.dx();
    rep.cubic_certificate = regcalc::epsilon_sweep(
        [&](double e) { return regcalc::cubic_variation(eta_path, e).terminal(); }, eps0, 5);
    double e = eps0;
    for (std::size_t k = 0; k < 5; ++k, e *= 0.5)
        rep.strong_norms.push_back(regcalc::cubic_variation(eta_path, e, true).terminal());

    // stage 2..: solve on nested grids, eta subsampled consistently
    for (std::size_t stage = 0; stage < sc.stages; ++stage) {
        std::size_t stride = static_cast<std::size_t>(1) << (sc.stages - 1 - stage);
        std::size_t n = (sc.n_finest - 1) / stride + 1;
        std::vector<double> ev(n);
        for (std::size_t i = 0; i < n; ++i) ev[i] = env.path.value(i * stride);
        GridFunction eta_s(-sc.L, sc.L, std::move(ev));

        scale::CoefficientPair coeffs;
        coeffs.sigma = GridFunction::constant(-sc.L, sc.L, n, 1.0);
        coeffs.b = eta_s;
        coeffs.route = scale::CoefficientPair::Route::sigma_bv;  // sigma constant: Sigma = 2 eta
        auto sig = scale::compute_sigma_big(coeffs);
        auto maps = scale::build_scale_maps(coeffs, sig.sigma_big);
        if (stage + 1 == sc.stages) rep.feasibility = scale::feasibility(coeffs, sig.sigma_big);

        pde::CauchyProblem problem;
        problem.coeffs = coeffs;
        problem.maps = maps;
        problem.u0 = GridFunction::sample(-sc.L, sc.L, n, [&](double x) {
            double z = x / sc.u0_width;
            return std::exp(-z * z);
        });
        problem.lambda = pde::SpaceTimeFunction::constant(sc.lambda_const, problem.u0, sc.T);
        problem.T = sc.T;
        std::size_t nt = sc.time_steps_finest / stride;
        auto fd = pde::solve_fd(problem, 0.0, pde::FdCoords::h_transform, std::max<std::size_t>(nt, 32));

        SpdeStage st;
        st.dx = eta_s.dx();
        st.epsilon = sc.eps_over_dx * st.dx;
        for (double center : {-sc.L / 2.0, 0.0, sc.L / 2.0}) {
            auto alpha = GridFunction::sample(-sc.L, sc.L, n, [&](double x) {
                double z = (x - center) / (sc.L / 8.0);
                double r = 1.0 - z * z;
                return r > 0 ? std::exp(-1.0 / r) : 0.0;
            });
            for (std::size_t q = 1; q <= sc.n_times; ++q) {
                double t = sc.T * static_cast<double>(q) / static_cast<double>(sc.n_times + 1);
                auto wf = weak_residual(fd.u, WeakForm::Form::dual, alpha, t, eta_s,
                                        problem.lambda, problem.u0, st.epsilon);
                st.max_rel_residual =
                    std::max(st.max_rel_residual, std::abs(wf.residual) / std::max(wf.dominant(), 1e-300));
                st.forms.push_back(wf);
            }
        }
        // duality check once, on the finest stage
        if (stage + 1 == sc.stages) {
            auto v = dual_transform(fd.u);
            auto alpha_fn = GridFunction::sample(-sc.L, sc.L, n, [&](double x) {
                double z = (x + sc.L / 2.0) / (sc.L / 8.0);
                double r = 1.0 - z * z;
                return r > 0 ? std::exp(-1.0 / r) : 0.0;
            });
            double t = sc.T / static_cast<double>(sc.n_times + 1);
            auto rig = weak_residual(v, WeakForm::Form::rig, alpha_fn, sc.T - t, eta_s,
                                     problem.lambda, problem.u0, st.epsilon);
            auto dual = weak_residual(fd.u, WeakForm::Form::dual, alpha_fn, t, eta_s,
                                      problem.lambda, problem.u0, st.epsilon);
            rep.duality_gap = std::abs(rig.residual - dual.residual);
        }
        rep.stages.push_back(std::move(st));
    }
    rep.final_max_rel_residual = rep.stages.back().max_rel_residual;
    return rep;
}

}  // namespace irrdrift::spde
