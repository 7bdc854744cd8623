#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "grid_function.hpp"
#include "sample_path.hpp"

namespace irrdrift::regcalc {

// Stochastic calculus via regularization on discrete paths. The epsilon-level
// integrals are trapezoid discretizations of their defining time integrals,
// with constant extension of paths beyond the horizon. epsilon is rounded to
// an integer multiple of dt and the value actually used is recorded.

struct RegularizedIntegral {
    enum class Kind { forward, symmetric, covariation, cubic, cubic_strong_norm };
    Kind kind = Kind::forward;
    double epsilon = 0;   // the rounded value actually used
    SamplePath values;    // running integral t -> value, starts at 0

    double terminal() const { return values.back(); }
};

namespace detail {

inline std::size_t steps_for(double epsilon, double dt) {
    auto m = static_cast<std::ptrdiff_t>(std::llround(epsilon / dt));
    if (m < 1) m = 1;
    return static_cast<std::size_t>(m);
}

// Running trapezoid of a pointwise integrand g_i over the path grid.
inline SamplePath running_trapezoid(const SamplePath& grid_like, const std::vector<double>& g) {
    SamplePath out;
    out.t0 = grid_like.t0;
    out.dt = grid_like.dt;
    out.kind = SamplePath::Kind::deterministic;
    out.values.assign(g.size(), 0.0);
    for (std::size_t i = 1; i < g.size(); ++i)
        out.values[i] = out.values[i - 1] + 0.5 * (g[i - 1] + g[i]) * grid_like.dt;
    return out;
}

template <class Fn>
RegularizedIntegral build(RegularizedIntegral::Kind kind, const SamplePath& X, double epsilon,
                          Fn&& integrand) {
    std::size_t m = steps_for(epsilon, X.dt);
    double eps = static_cast<double>(m) * X.dt;
    std::vector<double> g(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) g[i] = integrand(static_cast<std::ptrdiff_t>(i), m, eps);
    RegularizedIntegral r;
    r.kind = kind;
    r.epsilon = eps;
    r.values = running_trapezoid(X, g);
    return r;
}

// Strided Holder-norm estimate, bounded work for diagnostics on big grids.
inline double holder_norm_estimate(const GridFunction& f, double gamma, std::size_t max_nodes = 1024) {
    std::size_t n = f.size();
    std::size_t stride = (n + max_nodes - 1) / max_nodes;
    if (stride < 1) stride = 1;
    double best = 0;
    for (std::size_t i = 0; i < n; i += stride)
        for (std::size_t j = i + stride; j < n; j += stride) {
            double num = std::abs(f.value(j) - f.value(i));
            best = std::max(best, num / std::pow(static_cast<double>(j - i) * f.dx(), gamma));
        }
    return best;
}

}  // namespace detail

// Trapezoid average of Y over the window [t_j, t_j + eps], clamped extension.
// This is the epsilon-level boundary object entering the discrete
// integration-by-parts identities.
inline double window_average(const SamplePath& Y, std::size_t j, double epsilon) {
    std::size_t m = detail::steps_for(epsilon, Y.dt);
    auto base = static_cast<std::ptrdiff_t>(j);
    double s = 0.5 * (Y.at_clamped(base) + Y.at_clamped(base + static_cast<std::ptrdiff_t>(m)));
    for (std::size_t k = 1; k < m; ++k) s += Y.at_clamped(base + static_cast<std::ptrdiff_t>(k));
    return s / static_cast<double>(m);
}

// Forward integral: trapezoid of Y_s (X_{s+eps} - X_s)/eps.
inline RegularizedIntegral forward_integral(const SamplePath& Y, const SamplePath& X,
                                            double epsilon) {
    if (!Y.same_grid(X)) throw std::invalid_argument("forward_integral: mismatched grids");
    return detail::build(RegularizedIntegral::Kind::forward, X, epsilon,
                         [&](std::ptrdiff_t i, std::size_t m, double eps) {
                             auto mm = static_cast<std::ptrdiff_t>(m);
                             return Y.at_clamped(i) * (X.at_clamped(i + mm) - X.at_clamped(i)) / eps;
                         });
}

// Symmetric integral. Discretized with the window form
//   (Y_s + Y_{s+eps})/2 * (X_{s+eps} - X_s)/eps,
// which has the same eps -> 0 limit as the centered difference and equals
// forward + covariation/2 identically at fixed eps (Remark R1.1(a) algebra
// survives discretization exactly).
inline RegularizedIntegral symmetric_integral(const SamplePath& Y, const SamplePath& X,
                                              double epsilon) {
    if (!Y.same_grid(X)) throw std::invalid_argument("symmetric_integral: mismatched grids");
    return detail::build(RegularizedIntegral::Kind::symmetric, X, epsilon,
                         [&](std::ptrdiff_t i, std::size_t m, double eps) {
                             auto mm = static_cast<std::ptrdiff_t>(m);
                             double dX = X.at_clamped(i + mm) - X.at_clamped(i);
                             return 0.5 * (Y.at_clamped(i) + Y.at_clamped(i + mm)) * dX / eps;
                         });
}

inline RegularizedIntegral covariation(const SamplePath& X, const SamplePath& Y, double epsilon) {
    if (!Y.same_grid(X)) throw std::invalid_argument("covariation: mismatched grids");
    return detail::build(RegularizedIntegral::Kind::covariation, X, epsilon,
                         [&](std::ptrdiff_t i, std::size_t m, double eps) {
                             auto mm = static_cast<std::ptrdiff_t>(m);
                             return (X.at_clamped(i + mm) - X.at_clamped(i)) *
                                    (Y.at_clamped(i + mm) - Y.at_clamped(i)) / eps;
                         });
}

// [X,X,X]^eps (signed) or its strong norm ||.||^eps with |increment|^3.
inline RegularizedIntegral cubic_variation(const SamplePath& X, double epsilon,
                                           bool strong = false) {
    auto kind = strong ? RegularizedIntegral::Kind::cubic_strong_norm
                       : RegularizedIntegral::Kind::cubic;
    return detail::build(kind, X, epsilon, [&](std::ptrdiff_t i, std::size_t m, double eps) {
        auto mm = static_cast<std::ptrdiff_t>(m);
        double d = X.at_clamped(i + mm) - X.at_clamped(i);
        double c = d * d * d;
        return (strong ? std::abs(c) : c) / eps;
    });
}

// Geometric sweep eps_k = eps0 * 2^-k standing in for the eps -> 0+ limit.
struct EpsilonSweep {
    std::vector<double> epsilons;         // strictly decreasing
    std::vector<double> terminal_values;  // one per epsilon
    bool diverged = false;                // successive differences not shrinking
    double extrapolated_limit = 0;        // Richardson on the two finest stages

    double final_value() const { return terminal_values.back(); }
};

inline EpsilonSweep epsilon_sweep(const std::function<double(double)>& terminal_at, double eps0,
                                  std::size_t stages) {
    if (stages < 2) throw std::invalid_argument("epsilon_sweep: need >= 2 stages");
    EpsilonSweep s;
    double eps = eps0;
    for (std::size_t k = 0; k < stages; ++k, eps *= 0.5) {
        s.epsilons.push_back(eps);
        s.terminal_values.push_back(terminal_at(eps));
    }
    double prev_delta = -1;
    for (std::size_t k = 1; k < stages; ++k) {
        double delta = std::abs(s.terminal_values[k] - s.terminal_values[k - 1]);
        if (prev_delta >= 0 && delta > prev_delta && k + 1 == stages) s.diverged = true;
        prev_delta = delta;
    }
    std::size_t last = stages - 1;
    s.extrapolated_limit = 2.0 * s.terminal_values[last] - s.terminal_values[last - 1];
    return s;
}

inline std::string sweep_csv(const EpsilonSweep& s) {
    std::ostringstream os;
    os << "epsilon,terminal_value\n";
    for (std::size_t i = 0; i < s.epsilons.size(); ++i)
        os << s.epsilons[i] << ',' << s.terminal_values[i] << '\n';
    return os.str();
}

// Definite symmetric integral over the whole (truncated) line, centered
// difference per its definition; Y must vanish at both domain ends (the
// compact-support convention).
inline double definite_symmetric_value(const SamplePath& Y, const SamplePath& X, double epsilon) {
    if (!Y.same_grid(X)) throw std::invalid_argument("definite_symmetric: mismatched grids");
    double scale = 1e-10 * (std::abs(Y.values.front()) + std::abs(Y.values.back()) + 1.0);
    if (std::abs(Y.values.front()) > scale || std::abs(Y.values.back()) > scale)
        throw std::invalid_argument("definite_symmetric: Y must vanish at the domain ends");
    std::size_t m = detail::steps_for(epsilon, X.dt);
    double eps = static_cast<double>(m) * X.dt;
    auto mm = static_cast<std::ptrdiff_t>(m);
    std::vector<double> g(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) {
        auto ii = static_cast<std::ptrdiff_t>(i);
        g[i] = Y.values[i] * (X.at_clamped(ii + mm) - X.at_clamped(ii - mm)) / (2.0 * eps);
    }
    double s = 0.5 * (g.front() + g.back());
    for (std::size_t i = 1; i + 1 < g.size(); ++i) s += g[i];
    return s * X.dt;
}

inline EpsilonSweep definite_symmetric_integral(const SamplePath& Y, const SamplePath& X,
                                                double eps0, std::size_t stages = 4) {
    return epsilon_sweep([&](double e) { return definite_symmetric_value(Y, X, e); }, eps0, stages);
}

// ---------------------------------------------------------------------------
// Young integration on grid functions.

struct YoungResult {
    GridFunction integral;  // running integral from the domain left end
    double gamma = 0, beta = 0;
    double n_gamma = 0, n_beta = 0;  // measured Holder norms for the diagnostics
    std::size_t levels_used = 0;
    double last_delta = 0;
    bool exponents_ok = true;  // gamma + beta > 1
};

class YoungDivergedError : public std::runtime_error {
public:
    explicit YoungDivergedError(std::vector<double> deltas)
        : std::runtime_error("young_integral: refinement not converging"), deltas_(std::move(deltas)) {}
    const std::vector<double>& deltas() const { return deltas_; }

private:
    std::vector<double> deltas_;
};

// Left-point Riemann-Stieltjes sums under dyadic refinement, stopping when
// two successive refinements are uniformly within tol.
inline YoungResult young_integral(const GridFunction& f, const GridFunction& g, double gamma,
                                  double beta, double tol = 1e-7) {
    if (!(f.x_min() == g.x_min() && f.x_max() == g.x_max()))
        throw std::invalid_argument("young_integral: domains differ");
    double A = f.x_min(), B = f.x_max();
    std::size_t out_n = std::max(f.size(), g.size());

    auto running_at_level = [&](std::size_t k) {
        auto cells = static_cast<std::size_t>(1) << k;
        double h = (B - A) / static_cast<double>(cells);
        std::vector<double> run(cells + 1, 0.0);
        for (std::size_t i = 0; i < cells; ++i) {
            double x = A + static_cast<double>(i) * h;
            run[i + 1] = run[i] + f(x) * (g(x + h) - g(x));
        }
        return run;
    };

    // refine at least to the output resolution so the returned running
    // integral does not down-sample the integrator's roughness
    std::size_t k = 4;
    while ((static_cast<std::size_t>(1) << k) + 1 < out_n) ++k;
    std::vector<double> prev = running_at_level(k);
    std::vector<double> cur;
    std::vector<double> deltas;
    double last_delta = 0;
    std::size_t k_max = std::max<std::size_t>(18, k + 2);
    for (++k; k <= k_max; ++k) {
        cur = running_at_level(k);
        double d = 0;
        for (std::size_t i = 0; i < prev.size(); ++i)
            d = std::max(d, std::abs(cur[2 * i] - prev[i]));
        deltas.push_back(d);
        last_delta = d;
        bool grew_twice = deltas.size() >= 3 && deltas.end()[-1] > deltas.end()[-2] &&
                          deltas.end()[-2] > deltas.end()[-3];
        if (grew_twice) throw YoungDivergedError(deltas);
        if (d < tol || k == k_max) break;
        prev = std::move(cur);
    }
    // Richardson estimate of the dyadic limit on the coarse common nodes
    // (left-point sums converge first order in the cell width).
    std::vector<double> lim(prev.size());
    for (std::size_t i = 0; i < prev.size(); ++i) lim[i] = 2.0 * cur[2 * i] - prev[i];

    std::vector<double> out(out_n);
    double h_fine = (B - A) / static_cast<double>(lim.size() - 1);
    for (std::size_t i = 0; i < out_n; ++i) {
        double x = A + (B - A) * static_cast<double>(i) / static_cast<double>(out_n - 1);
        double t = (x - A) / h_fine;
        auto j = std::min(static_cast<std::size_t>(t), lim.size() - 2);
        double w = t - static_cast<double>(j);
        out[i] = lim[j] + w * (lim[j + 1] - lim[j]);
    }
    YoungResult r;
    r.integral = GridFunction(A, B, std::move(out));
    r.gamma = gamma;
    r.beta = beta;
    r.n_gamma = detail::holder_norm_estimate(f, std::min(gamma, 0.999));
    r.n_beta = detail::holder_norm_estimate(g, std::min(beta, 0.999));
    r.levels_used = std::min(k, k_max);
    r.last_delta = last_delta;
    r.exponents_ok = gamma + beta > 1.0;
    return r;
}

}  // namespace irrdrift::regcalc
