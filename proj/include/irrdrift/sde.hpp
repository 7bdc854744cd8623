#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "grid_function.hpp"
#include "parallel.hpp"
#include "regcalc.hpp"
#include "rng.hpp"
#include "sample_path.hpp"
#include "scale.hpp"

namespace irrdrift::sde {

// Simulation of X with distributional drift through the h-transform:
// either Euler-Maruyama on Y = h(X) (driftless, coefficient sigma_h~), or the
// Engelbert-Schmidt time change of a Brownian motion. Paths leaving the
// truncated domain are stopped and flagged; flagged paths are excluded from
// law-level statistics and their fraction is reported.

struct SdeRun {
    scale::ScaleMaps maps;
    scale::CoefficientPair coeffs;
    double s = 0.0;
    double x0 = 0.0;
    double T = 1.0;
    double dt = 1e-3;
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    enum class Method { euler_on_y, time_change } method = Method::euler_on_y;

    std::size_t steps() const {
        return static_cast<std::size_t>(std::llround((T - s) / dt));
    }
};

struct PathOutput {
    std::vector<double> x;   // X at the output nodes, frozen after an exit
    std::vector<double> dw;  // driving (or reconstructed) Brownian increments
    bool exited = false;
    std::size_t exit_step = 0;
};

namespace detail {

inline void euler_on_y_path(const SdeRun& run, std::size_t idx, PathOutput& out) {
    std::size_t n = run.steps();
    out.x.assign(n + 1, 0.0);
    out.dw.assign(n, 0.0);
    out.exited = false;
    out.exit_step = n;
    const auto& sig = run.maps.sigma_h_tilde;
    double y_lo = sig.x_min(), y_hi = sig.x_max();
    double y = run.maps.h(run.x0);
    out.x[0] = run.x0;
    double sqdt = std::sqrt(run.dt);
    for (std::size_t i = 0; i < n; ++i) {
        double dw = sqdt * rng::normal(run.seed, idx, i);
        out.dw[i] = dw;
        if (!out.exited) {
            double y_next = y + sig(y) * dw;
            if (y_next < y_lo || y_next > y_hi) {
                out.exited = true;
                out.exit_step = i;
            } else {
                y = y_next;
            }
        }
        out.x[i + 1] = out.exited ? out.x[i] : run.maps.h_inv(y);
    }
}

inline void time_change_path(const SdeRun& run, std::size_t idx, PathOutput& out) {
    std::size_t n = run.steps();
    out.x.assign(n + 1, 0.0);
    out.dw.assign(n, 0.0);
    out.exited = false;
    out.exit_step = n;
    const auto& sig = run.maps.sigma_h_tilde;
    double y_lo = sig.x_min(), y_hi = sig.x_max();
    double y0 = run.maps.h(run.x0);
    out.x[0] = run.x0;

    // B on a grid 8x finer than the output grid; R accumulated by trapezoid,
    // inverted on the fly. Budget extended once, then the path is flagged.
    double dtau = run.dt / 8.0;
    double sqdtau = std::sqrt(dtau);
    double horizon = run.T - run.s;
    auto budget = static_cast<std::size_t>(std::llround(16.0 * horizon / dtau));
    bool extended = false;

    double B = 0.0, R = 0.0;
    double inv_prev = 1.0 / (sig(y0) * sig(y0));
    std::vector<double> y_at(n + 1, y0);
    std::size_t next_out = 1;
    std::size_t j = 0;
    while (next_out <= n) {
        if (j >= budget) {
            if (!extended) {
                extended = true;
                budget *= 8;
            } else {
                out.exited = true;  // time-change budget exhausted; flagged like an exit
                out.exit_step = next_out - 1;
                break;
            }
        }
        double b_next = B + sqdtau * rng::normal(run.seed, idx, j);
        double yb = y0 + b_next;
        if (yb < y_lo || yb > y_hi) {
            out.exited = true;
            out.exit_step = next_out - 1;
            break;
        }
        double inv_next = 1.0 / (sig(yb) * sig(yb));
        double r_next = R + dtau * 0.5 * (inv_prev + inv_next);
        while (next_out <= n && r_next >= static_cast<double>(next_out) * run.dt) {
            double t = static_cast<double>(next_out) * run.dt;
            double w = (t - R) / (r_next - R);
            y_at[next_out] = y0 + B + w * (b_next - B);
            ++next_out;
        }
        B = b_next;
        R = r_next;
        inv_prev = inv_next;
        ++j;
    }
    for (std::size_t i = 1; i <= n; ++i) {
        if (out.exited && i > out.exit_step) {
            out.x[i] = out.x[out.exit_step];
        } else {
            out.x[i] = run.maps.h_inv(y_at[i]);
        }
    }
    // reconstructed Brownian increments dW = dY / sigma_h~(Y)
    for (std::size_t i = 0; i < n; ++i) {
        if (out.exited && i >= out.exit_step) break;
        out.dw[i] = (y_at[i + 1] - y_at[i]) / sig(y_at[i]);
    }
}

}  // namespace detail

inline void simulate_path(const SdeRun& run, std::size_t idx, PathOutput& out) {
    if (run.method == SdeRun::Method::euler_on_y)
        detail::euler_on_y_path(run, idx, out);
    else
        detail::time_change_path(run, idx, out);
}

// Deterministic over-paths driver: visitor(i, path) runs in parallel with a
// per-path buffer; any reduction must write to per-index slots.
template <class Visitor>
void for_each_path(const SdeRun& run, Visitor&& visitor) {
    parallel_for(run.n_paths, [&](std::size_t i) {
        thread_local PathOutput buf;
        simulate_path(run, i, buf);
        visitor(i, buf);
    });
}

struct TerminalLaw {
    std::vector<double> terminals;  // retained (non-exited) paths only
    double exit_fraction = 0;
    std::size_t n_total = 0;
};

inline TerminalLaw terminal_law(const SdeRun& run) {
    std::vector<double> vals(run.n_paths);
    std::vector<char> exited(run.n_paths, 0);
    for_each_path(run, [&](std::size_t i, const PathOutput& p) {
        vals[i] = p.x.back();
        exited[i] = p.exited ? 1 : 0;
    });
    TerminalLaw law;
    law.n_total = run.n_paths;
    std::size_t n_exit = 0;
    for (std::size_t i = 0; i < run.n_paths; ++i) {
        if (exited[i]) {
            ++n_exit;
        } else {
            law.terminals.push_back(vals[i]);
        }
    }
    law.exit_fraction = static_cast<double>(n_exit) / static_cast<double>(run.n_paths);
    return law;
}

// Two-sample Kolmogorov-Smirnov distance and critical value.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        double fa = static_cast<double>(i) / a.size();
        double fb = static_cast<double>(j) / b.size();
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

inline double ks_critical(std::size_t n, std::size_t m, double alpha = 0.05) {
    double c = alpha <= 0.01 ? 1.628 : 1.358;
    return c * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * m));
}

// Direct Euler-Maruyama on dX = b'(X) dt + sigma(X) dW for classical
// (smooth-drift) coefficients; the reference side of Remark RSclass.
struct ClassicalEulerRun {
    scale::CoefficientPair coeffs;
    double x0 = 0.0;
    double T = 1.0;
    double dt = 1e-3;
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
};

inline void classical_euler_path(const ClassicalEulerRun& run, const GridFunction& b_prime,
                                 std::size_t idx, PathOutput& out) {
    auto n = static_cast<std::size_t>(std::llround(run.T / run.dt));
    out.x.assign(n + 1, run.x0);
    out.dw.assign(n, 0.0);
    out.exited = false;
    out.exit_step = n;
    double lo = run.coeffs.b.x_min(), hi = run.coeffs.b.x_max();
    double sqdt = std::sqrt(run.dt);
    double x = run.x0;
    for (std::size_t i = 0; i < n; ++i) {
        double dw = sqdt * rng::normal(run.seed, idx, i);
        out.dw[i] = dw;
        if (!out.exited) {
            double x_next = x + b_prime(x) * run.dt + run.coeffs.sigma(x) * dw;
            if (x_next < lo || x_next > hi) {
                out.exited = true;
                out.exit_step = i;
            } else {
                x = x_next;
            }
        }
        out.x[i + 1] = x;
    }
}

template <class Visitor>
void for_each_classical_path(const ClassicalEulerRun& run, Visitor&& visitor) {
    if (!run.coeffs.smooth)
        throw std::invalid_argument("classical_euler: coefficients not flagged smooth");
    auto bp = derivative(run.coeffs.b);
    parallel_for(run.n_paths, [&](std::size_t i) {
        thread_local PathOutput buf;
        classical_euler_path(run, bp, i, buf);
        visitor(i, buf);
    });
}

inline TerminalLaw classical_euler_terminal_law(const ClassicalEulerRun& run) {
    std::vector<double> vals(run.n_paths);
    std::vector<char> exited(run.n_paths, 0);
    for_each_classical_path(run, [&](std::size_t i, const PathOutput& p) {
        vals[i] = p.x.back();
        exited[i] = p.exited ? 1 : 0;
    });
    TerminalLaw law;
    law.n_total = run.n_paths;
    std::size_t n_exit = 0;
    for (std::size_t p = 0; p < run.n_paths; ++p) {
        if (exited[p])
            ++n_exit;
        else
            law.terminals.push_back(vals[p]);
    }
    law.exit_fraction = static_cast<double>(n_exit) / run.n_paths;
    return law;
}

// ---------------------------------------------------------------------------
// Martingale problem verification (Def. Dmp surrogate): unconditional means
// of compensated increments over checkpoint windows, 3 SE band.

struct MartingaleTestReport {
    enum class Test { h, h_squared, classical_f };
    Test test = Test::h;
    std::vector<double> checkpoints;
    std::vector<double> increment_means;
    std::vector<double> standard_errors;
    double exit_fraction = 0;
    std::size_t n_used = 0;
    bool pass = false;  // every |mean| <= 3 SE
};

inline MartingaleTestReport verify_martingale_problem(
    const SdeRun& run, MartingaleTestReport::Test test,
    const GridFunction* classical_f = nullptr, std::size_t n_checkpoints = 8) {
    if (test == MartingaleTestReport::Test::classical_f) {
        if (!run.coeffs.smooth)
            throw std::invalid_argument("verify_martingale_problem: classical_f needs smooth coefficients");
        if (!classical_f) throw std::invalid_argument("verify_martingale_problem: no test function");
    }

    std::size_t n = run.steps();
    std::vector<std::size_t> cp_steps(n_checkpoints);
    for (std::size_t k = 0; k < n_checkpoints; ++k)
        cp_steps[k] = ((k + 1) * n) / n_checkpoints;

    // transform g and compensator density c along the path:
    //   h:        g = h,   c = 0
    //   h^2:      g = h^2, c = (sigma h')^2   (Prop T212(a))
    //   classic:  g = f,   c = L f = sigma^2 f''/2 + b' f'
    GridFunction g, comp;
    bool with_comp = true;
    switch (test) {
        case MartingaleTestReport::Test::h:
            g = run.maps.h;
            with_comp = false;
            break;
        case MartingaleTestReport::Test::h_squared: {
            g = run.maps.h.map([](double v) { return v * v; });
            auto sh = zip(run.coeffs.sigma, run.maps.h_prime,
                          [](double s, double hp) { return s * hp; });
            comp = sh.map([](double v) { return v * v; });
            break;
        }
        case MartingaleTestReport::Test::classical_f: {
            g = *classical_f;
            auto fp = derivative(g);
            auto fpp = derivative(fp);
            auto bp = derivative(run.coeffs.b);
            auto s2 = run.coeffs.sigma_sq();
            comp = GridFunction(g.x_min(), g.x_max(), [&] {
                std::vector<double> v(g.size());
                for (std::size_t i = 0; i < g.size(); ++i)
                    v[i] = 0.5 * s2.value(i) * fpp.value(i) + bp.value(i) * fp.value(i);
                return v;
            }());
            break;
        }
    }

    // The tested object is the stopped process: paths frozen at the
    // truncation exit stay in the ensemble with frozen compensators
    // (optional stopping keeps the martingale property; excluding exited
    // paths would bias the retained increments).
    std::vector<double> incr(run.n_paths * n_checkpoints, 0.0);
    std::vector<char> exited(run.n_paths, 0);
    for_each_path(run, [&](std::size_t p, const PathOutput& path) {
        exited[p] = path.exited ? 1 : 0;
        double running_comp = 0;
        double g_prev_cp = g(path.x[0]);
        double comp_prev_cp = 0;
        std::size_t k = 0;
        for (std::size_t i = 1; i <= n; ++i) {
            bool stopped = path.exited && i > path.exit_step;
            if (with_comp && !stopped)
                running_comp += run.dt * 0.5 * (comp(path.x[i - 1]) + comp(path.x[i]));
            if (k < n_checkpoints && i == cp_steps[k]) {
                double gv = g(path.x[i]);
                incr[p * n_checkpoints + k] =
                    (gv - g_prev_cp) - (running_comp - comp_prev_cp);
                g_prev_cp = gv;
                comp_prev_cp = running_comp;
                ++k;
            }
        }
    });

    MartingaleTestReport rep;
    rep.test = test;
    std::size_t n_exit = 0;
    for (std::size_t p = 0; p < run.n_paths; ++p)
        if (exited[p]) ++n_exit;
    rep.n_used = run.n_paths;
    rep.exit_fraction = static_cast<double>(n_exit) / run.n_paths;
    rep.pass = run.n_paths > 1;
    for (std::size_t k = 0; k < n_checkpoints; ++k) {
        double mean = 0;
        for (std::size_t p = 0; p < run.n_paths; ++p) mean += incr[p * n_checkpoints + k];
        mean /= static_cast<double>(run.n_paths);
        double var = 0;
        for (std::size_t p = 0; p < run.n_paths; ++p) {
            double d = incr[p * n_checkpoints + k] - mean;
            var += d * d;
        }
        var /= static_cast<double>(run.n_paths - 1);
        double se = std::sqrt(var / static_cast<double>(run.n_paths));
        rep.checkpoints.push_back(run.s + run.dt * static_cast<double>(cp_steps[k]));
        rep.increment_means.push_back(mean);
        rep.standard_errors.push_back(se);
        if (std::abs(mean) > 3.0 * se) rep.pass = false;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Quadratic variation identity (Remark R3.4): [X,X]_T vs int sigma^2(X) ds.

struct QvReport {
    double epsilon = 0;
    double median_rel_dev = 0;
    double exit_fraction = 0;
    std::size_t n_used = 0;
};

inline QvReport quadratic_variation_check(const SdeRun& run, double eps_over_dt = 10.0) {
    double eps = eps_over_dt * run.dt;
    std::vector<double> devs(run.n_paths, -1.0);
    for_each_path(run, [&](std::size_t p, const PathOutput& path) {
        if (path.exited) return;
        SamplePath xp = SamplePath::deterministic_path(run.s, run.dt, path.x);
        double qv = regcalc::covariation(xp, xp, eps).terminal();
        double compensator = 0;
        for (std::size_t i = 1; i < path.x.size(); ++i) {
            double s0 = run.coeffs.sigma(path.x[i - 1]);
            double s1 = run.coeffs.sigma(path.x[i]);
            compensator += 0.5 * (s0 * s0 + s1 * s1) * run.dt;
        }
        devs[p] = std::abs(qv - compensator) / std::max(std::abs(compensator), 1e-12);
    });
    QvReport rep;
    rep.epsilon = eps;
    std::vector<double> kept;
    for (double d : devs)
        if (d >= 0) kept.push_back(d);
    rep.n_used = kept.size();
    rep.exit_fraction = 1.0 - static_cast<double>(kept.size()) / run.n_paths;
    if (!kept.empty()) {
        std::sort(kept.begin(), kept.end());
        rep.median_rel_dev = kept[kept.size() / 2];
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Extended drift operator A^X(ell) = f(X) - f(X_0) - int f'(X) sigma(X) dW,
// with f = T ell (Lemma L3.9 route); left-point Ito discretization.

inline std::vector<double> extended_drift(const std::vector<double>& x,
                                          const std::vector<double>& dw, const GridFunction& f,
                                          const GridFunction& f_prime, const GridFunction& sigma) {
    std::vector<double> a(x.size(), 0.0);
    double f0 = f(x[0]);
    double ito = 0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        ito += f_prime(x[i - 1]) * sigma(x[i - 1]) * dw[i - 1];
        a[i] = f(x[i]) - f0 - ito;
    }
    return a;
}

// Median over paths of sup_t |X - X_0 - int sigma(X) dW - A^X(b)| (E3.12).
struct DecompositionReport {
    double median_sup = 0;
    double median_range = 0;  // median path range, the comparison scale
    std::size_t n_used = 0;
};

namespace detail {

template <class Driver>
DecompositionReport decomposition_over(std::size_t n_paths, const GridFunction& sigma,
                                       const scale::TResult& Tb, Driver&& driver) {
    std::vector<double> sups(n_paths, -1.0), ranges(n_paths, 0.0);
    driver([&](std::size_t p, const PathOutput& path) {
        if (path.exited) return;
        auto a = extended_drift(path.x, path.dw, Tb.f, Tb.f_prime, sigma);
        double ito = 0, sup = 0;
        double lo = path.x[0], hi = path.x[0];
        for (std::size_t i = 1; i < path.x.size(); ++i) {
            ito += sigma(path.x[i - 1]) * path.dw[i - 1];
            double res = path.x[i] - path.x[0] - ito - a[i];
            sup = std::max(sup, std::abs(res));
            lo = std::min(lo, path.x[i]);
            hi = std::max(hi, path.x[i]);
        }
        sups[p] = sup;
        ranges[p] = hi - lo;
    });
    std::vector<double> s2, r2;
    for (std::size_t p = 0; p < n_paths; ++p)
        if (sups[p] >= 0) {
            s2.push_back(sups[p]);
            r2.push_back(ranges[p]);
        }
    DecompositionReport rep;
    rep.n_used = s2.size();
    if (!s2.empty()) {
        std::sort(s2.begin(), s2.end());
        std::sort(r2.begin(), r2.end());
        rep.median_sup = s2[s2.size() / 2];
        rep.median_range = r2[r2.size() / 2];
    }
    return rep;
}

}  // namespace detail

inline DecompositionReport decomposition_check(const SdeRun& run, const scale::TResult& Tb) {
    return detail::decomposition_over(run.n_paths, run.coeffs.sigma, Tb, [&](auto&& visitor) {
        for_each_path(run, visitor);
    });
}

inline DecompositionReport decomposition_check_classical(const ClassicalEulerRun& run,
                                                         const scale::TResult& Tb) {
    return detail::decomposition_over(run.n_paths, run.coeffs.sigma, Tb, [&](auto&& visitor) {
        for_each_classical_path(run, visitor);
    });
}

}  // namespace irrdrift::sde
