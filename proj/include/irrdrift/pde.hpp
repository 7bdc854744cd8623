#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "grid_function.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "scale.hpp"
#include "sde.hpp"

namespace irrdrift::pde {

// A bounded function of (t, x): frames on the solver time nodes, linear
// interpolation in t, GridFunction semantics in x.
struct SpaceTimeFunction {
    double T = 1.0;
    std::vector<GridFunction> frames;  // frame j at time j * T / (frames-1)

    static SpaceTimeFunction constant(double c, const GridFunction& like, double T) {
        SpaceTimeFunction f;
        f.T = T;
        f.frames = {GridFunction::constant(like.x_min(), like.x_max(), like.size(), c),
                    GridFunction::constant(like.x_min(), like.x_max(), like.size(), c)};
        return f;
    }

    double frame_dt() const { return T / static_cast<double>(frames.size() - 1); }

    double operator()(double t, double x) const {
        if (frames.size() == 1) return frames[0](x);
        double u = std::clamp(t / T, 0.0, 1.0) * static_cast<double>(frames.size() - 1);
        auto j = std::min(static_cast<std::size_t>(u), frames.size() - 2);
        double w = u - static_cast<double>(j);
        return (1.0 - w) * frames[j](x) + w * frames[j + 1](x);
    }

    double max_abs() const {
        double m = 0;
        for (const auto& f : frames) m = std::max(m, f.max_abs());
        return m;
    }
};

// Terminal-value problem: L u = lambda, u(T, .) = u0 (the operator acts in x;
// the probabilistic form is u(s,x) = E[u0(X_T) - int_s^T lambda(r, X_r) dr]).
struct CauchyProblem {
    scale::CoefficientPair coeffs;
    scale::ScaleMaps maps;
    GridFunction u0;
    SpaceTimeFunction lambda;
    double T = 1.0;
};

// ---------------------------------------------------------------------------
// Monte Carlo solver (probabilistic representation).

struct McSolution {
    std::vector<double> x;       // source points
    std::vector<double> u;       // estimates of u(s, x)
    std::vector<double> se;      // standard errors
    std::vector<double> exit_fraction;
    std::vector<bool> warn;      // exit fraction > 20% at this source
};

inline McSolution solve_mc(const CauchyProblem& problem, double s, const std::vector<double>& xs,
                           std::size_t n_paths, std::uint64_t seed, double dt = 1e-3) {
    McSolution sol;
    sol.x = xs;
    for (std::size_t q = 0; q < xs.size(); ++q) {
        sde::SdeRun run;
        run.maps = problem.maps;
        run.coeffs = problem.coeffs;
        run.s = s;
        run.x0 = xs[q];
        run.T = problem.T;
        run.dt = dt;
        run.n_paths = n_paths;
        run.seed = rng::sub_seed(seed, q);
        std::vector<double> vals(n_paths);
        std::vector<char> exited(n_paths, 0);
        sde::for_each_path(run, [&](std::size_t p, const sde::PathOutput& path) {
            exited[p] = path.exited ? 1 : 0;
            if (path.exited) return;
            double acc = 0;
            for (std::size_t i = 1; i < path.x.size(); ++i) {
                double t0 = s + run.dt * static_cast<double>(i - 1);
                double t1 = t0 + run.dt;
                acc += 0.5 * (problem.lambda(t0, path.x[i - 1]) + problem.lambda(t1, path.x[i])) *
                       run.dt;
            }
            vals[p] = problem.u0(path.x.back()) - acc;
        });
        double mean = 0;
        std::size_t used = 0;
        for (std::size_t p = 0; p < n_paths; ++p)
            if (!exited[p]) {
                mean += vals[p];
                ++used;
            }
        if (used == 0) {
            sol.u.push_back(0);
            sol.se.push_back(0);
            sol.exit_fraction.push_back(1.0);
            sol.warn.push_back(true);
            continue;
        }
        mean /= static_cast<double>(used);
        double var = 0;
        for (std::size_t p = 0; p < n_paths; ++p)
            if (!exited[p]) var += (vals[p] - mean) * (vals[p] - mean);
        var /= std::max<std::size_t>(used - 1, 1);
        double ef = 1.0 - static_cast<double>(used) / n_paths;
        sol.u.push_back(mean);
        sol.se.push_back(std::sqrt(var / used));
        sol.exit_fraction.push_back(ef);
        sol.warn.push_back(ef > 0.20);
    }
    return sol;
}

// ---------------------------------------------------------------------------
// Finite-difference solver.
//
// The transformed equation L0 u~ = lambda~ (heat type, Thm T313) is
// discretized through the x-parameterization: with u^(t,x) = u~(t,h(x)),
//   d_t u^ + (sigma^2 h'/2) d_x( (1/h') d_x u^ ) = lambda(t,x)
// on the uniform x-grid (the h-image of this grid is the nonuniform y-grid).
// The k-coordinate divergence form discretizes analogously. Crank-Nicolson
// with a Rannacher start; Dirichlet boundary values evolved by the
// zero-diffusion ODE d_t u = lambda.

enum class FdCoords { h_transform, k_divergence };

struct FdSolution {
    SpaceTimeFunction u;  // frames from t = s to t = T (frame 0 at s)
    double s = 0;
    double dt = 0;
    double stability_ratio = 0;

    const GridFunction& at_s() const { return u.frames.front(); }
};

namespace detail {

inline void thomas_solve(std::vector<double>& lower, std::vector<double>& diag,
                         std::vector<double>& upper, std::vector<double>& rhs) {
    std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        double m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

}  // namespace detail

inline FdSolution solve_fd(const CauchyProblem& problem, double s,
                           FdCoords coords = FdCoords::h_transform, std::size_t n_steps = 256,
                           double max_ratio = 20000.0) {
    const auto& grid = problem.u0;
    std::size_t n = grid.size();
    double dx = grid.dx();
    double horizon = problem.T - s;
    if (horizon <= 0) throw std::invalid_argument("solve_fd: need s < T");
    double dt = horizon / static_cast<double>(n_steps);

    // conservative flux coefficients: A u = a_i (w_{i+1/2}(u_{i+1}-u_i) - w_{i-1/2}(u_i-u_{i-1}))/dx^2
    std::vector<double> a(n), w(n);  // w at nodes; midpoints averaged
    for (std::size_t i = 0; i < n; ++i) {
        double sig = problem.coeffs.sigma.value(i);
        double hp = problem.maps.h_prime.value(i);
        if (coords == FdCoords::h_transform) {
            a[i] = 0.5 * sig * sig * hp;
            w[i] = 1.0 / hp;
        } else {
            double kp = std::exp(problem.maps.Sigma.value(i)) / (sig * sig);
            a[i] = 0.5 / kp;
            w[i] = sig * sig * kp;
        }
    }
    double ratio = 0;
    for (std::size_t i = 1; i + 1 < n; ++i)
        ratio = std::max(ratio, a[i] * 0.5 * (w[i - 1] + 2 * w[i] + w[i + 1]) * dt / (dx * dx));
    if (ratio > max_ratio)
        throw std::runtime_error("solve_fd: stability ratio " + std::to_string(ratio) +
                                 " too large; need dt <= " +
                                 std::to_string(dt * max_ratio / ratio));

    double bound = problem.u0.max_abs() + horizon * problem.lambda.max_abs();

    std::vector<GridFunction> frames(n_steps + 1);
    std::vector<double> u = grid.values();
    frames[n_steps] = grid;
    auto apply_A = [&](const std::vector<double>& v, std::vector<double>& out) {
        out[0] = 0;
        out[n - 1] = 0;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            double wp = 0.5 * (w[i] + w[i + 1]);
            double wm = 0.5 * (w[i] + w[i - 1]);
            out[i] = a[i] * (wp * (v[i + 1] - v[i]) - wm * (v[i] - v[i - 1])) / (dx * dx);
        }
    };

    std::vector<double> Au(n), rhs(n), lower(n), diag(n), upper(n);
    for (std::size_t step = 0; step < n_steps; ++step) {
        // marching backward: from t_{j+1} to t_j, j = n_steps-1-step
        std::size_t j = n_steps - 1 - step;
        double t_now = s + dt * static_cast<double>(j + 1);
        double t_mid = t_now - 0.5 * dt;
        bool rannacher = step < 2;  // implicit start damps CN oscillation modes
        double theta = rannacher ? 1.0 : 0.5;

        apply_A(u, Au);
        for (std::size_t i = 0; i < n; ++i)
            rhs[i] = u[i] + (1.0 - theta) * dt * Au[i] - dt * problem.lambda(t_mid, grid.node(i));
        // boundary rows: zero-diffusion ODE
        rhs[0] = u[0] - dt * problem.lambda(t_mid, grid.node(0));
        rhs[n - 1] = u[n - 1] - dt * problem.lambda(t_mid, grid.node(n - 1));
        for (std::size_t i = 0; i < n; ++i) {
            if (i == 0 || i == n - 1) {
                lower[i] = 0;
                diag[i] = 1;
                upper[i] = 0;
                continue;
            }
            double wp = 0.5 * (w[i] + w[i + 1]);
            double wm = 0.5 * (w[i] + w[i - 1]);
            double c = theta * dt * a[i] / (dx * dx);
            lower[i] = -c * wm;
            diag[i] = 1.0 + c * (wp + wm);
            upper[i] = -c * wp;
        }
        detail::thomas_solve(lower, diag, upper, rhs);
        u = rhs;
        double mx = 0;
        for (double v : u) mx = std::max(mx, std::abs(v));
        if (mx > bound * (1.0 + 1e-9) + 1e-12)
            throw std::runtime_error("solve_fd: maximum principle violated: " + std::to_string(mx) +
                                     " > " + std::to_string(bound));
        frames[j] = GridFunction(grid.x_min(), grid.x_max(), u);
    }
    FdSolution sol;
    sol.s = s;
    sol.dt = dt;
    sol.stability_ratio = ratio;
    sol.u.T = horizon;
    sol.u.frames = std::move(frames);
    return sol;
}

// ---------------------------------------------------------------------------
// Transition-kernel estimation by KDE over simulated endpoints.

struct KernelEstimate {
    double t = 0;
    std::vector<double> sources;
    std::vector<GridFunction> rows;        // p^_t(x_q, .) on the target grid
    std::vector<GridFunction> counts;      // raw per-cell sample counts (binning evidence)
    std::vector<double> bandwidths;
    std::vector<double> exit_fractions;
    std::size_t n_paths = 0;
};

namespace detail {

inline double silverman_bandwidth(const std::vector<double>& samples) {
    double mean = 0;
    for (double v : samples) mean += v;
    mean /= samples.size();
    double var = 0;
    for (double v : samples) var += (v - mean) * (v - mean);
    var /= std::max<std::size_t>(samples.size() - 1, 1);
    return 1.06 * std::sqrt(var) * std::pow(static_cast<double>(samples.size()), -0.2);
}

// Gaussian KDE; each sample carries weight 1/n_total so the density
// integrates to the retained fraction.
inline GridFunction kde(const std::vector<double>& samples, std::size_t n_total, double bw,
                        const GridFunction& target) {
    std::vector<double> v(target.size(), 0.0);
    double norm = 1.0 / (static_cast<double>(n_total) * bw * 2.506628274631000502);
    for (std::size_t i = 0; i < target.size(); ++i) {
        double y = target.node(i), acc = 0;
        for (double sv : samples) {
            double zz = (y - sv) / bw;
            acc += std::exp(-0.5 * zz * zz);
        }
        v[i] = acc * norm;
    }
    return GridFunction(target.x_min(), target.x_max(), std::move(v));
}

inline GridFunction bin_counts(const std::vector<double>& samples, const GridFunction& target) {
    std::vector<double> c(target.size(), 0.0);
    for (double sv : samples) {
        double t = (sv - target.x_min()) / target.dx();
        auto i = static_cast<std::ptrdiff_t>(std::llround(t));
        if (i >= 0 && i < static_cast<std::ptrdiff_t>(target.size()))
            c[static_cast<std::size_t>(i)] += 1.0;
    }
    return GridFunction(target.x_min(), target.x_max(), std::move(c));
}

}  // namespace detail

// KDE plug-in standard error sqrt(rho R(K) / (n h)), R(gaussian) = 1/(2 sqrt(pi)).
inline double kde_se(double density, std::size_t n, double bw) {
    return std::sqrt(std::max(density, 0.0) * 0.28209479177387814 /
                     (static_cast<double>(n) * bw));
}

inline KernelEstimate estimate_kernel(const scale::CoefficientPair& coeffs,
                                      const scale::ScaleMaps& maps, double t,
                                      const std::vector<double>& x_sources, std::size_t n_paths,
                                      double bandwidth, std::uint64_t seed,
                                      const GridFunction& target, double dt = 1e-3) {
    if (bandwidth < 0) throw std::invalid_argument("estimate_kernel: bandwidth must be >= 0");
    KernelEstimate est;
    est.t = t;
    est.sources = x_sources;
    est.n_paths = n_paths;
    for (std::size_t q = 0; q < x_sources.size(); ++q) {
        sde::SdeRun run;
        run.maps = maps;
        run.coeffs = coeffs;
        run.s = 0;
        run.x0 = x_sources[q];
        run.T = t;
        run.dt = dt;
        run.n_paths = n_paths;
        run.seed = rng::sub_seed(seed, 1000 + q);
        auto law = sde::terminal_law(run);
        double bw = bandwidth > 0 ? bandwidth : detail::silverman_bandwidth(law.terminals);
        est.rows.push_back(detail::kde(law.terminals, n_paths, bw, target));
        est.counts.push_back(detail::bin_counts(law.terminals, target));
        est.bandwidths.push_back(bw);
        est.exit_fractions.push_back(law.exit_fraction);
    }
    return est;
}

// Aronson sandwich search: the smallest M >= 1 with
//   exp(-M d^2/t)/(M sqrt(t)) <= p^ <= M exp(-d^2/(M t))/sqrt(t)
// over probe cells holding at least min_count samples.
struct AronsonCheck {
    bool feasible = false;
    double M = 0;
    std::size_t n_probes = 0;
};

inline AronsonCheck aronson_check(const KernelEstimate& est, double min_count = 50,
                                  double m_max = 100.0) {
    AronsonCheck chk;
    std::vector<std::pair<double, double>> probes;  // (|x-y|, density)
    for (std::size_t q = 0; q < est.rows.size(); ++q)
        for (std::size_t i = 0; i < est.rows[q].size(); ++i)
            if (est.counts[q].value(i) >= min_count)
                probes.emplace_back(std::abs(est.rows[q].node(i) - est.sources[q]),
                                    est.rows[q].value(i));
    chk.n_probes = probes.size();
    if (probes.empty()) return chk;
    double t = est.t, sqt = std::sqrt(t);
    for (double M = 1.0; M <= m_max; M *= 1.05) {
        bool ok = true;
        for (auto [d, p] : probes) {
            double lower = std::exp(-M * d * d / t) / (M * sqt);
            double upper = M * std::exp(-d * d / (M * t)) / sqt;
            if (!(lower <= p && p <= upper)) {
                ok = false;
                break;
            }
        }
        if (ok) {
            chk.feasible = true;
            chk.M = M;
            return chk;
        }
    }
    return chk;
}

}  // namespace irrdrift::pde
