#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "grid_function.hpp"
#include "regcalc.hpp"

namespace irrdrift::scale {

// A diffusion coefficient pair (sigma, b) with the construction route for
// Sigma. Route selection is explicit: the four constructions have different
// validity domains and silent misuse would be undetectable.
struct CoefficientPair {
    enum class Route { smooth_drift, close_to_divergence, sigma_bv, holder_young, mollifier_limit };

    GridFunction sigma;  // > 0 on the domain
    GridFunction b;      // b(0) = 0
    Route route = Route::sigma_bv;

    double alpha = 1.0;                 // close_to_divergence: b = alpha(s^2 - s^2(0))/2 + beta
    std::optional<GridFunction> beta;   // close_to_divergence BV part
    double gamma_exp = 0.5;             // holder_young exponents (user supplied)
    double beta_exp = 0.6;
    bool smooth = false;                // b' continuous: classical operator

    void validate() const {
        if (!sigma.same_grid(b)) throw std::invalid_argument("CoefficientPair: sigma/b grids differ");
        if (!(sigma.min_value() > 0)) throw std::invalid_argument("CoefficientPair: sigma must be > 0");
        if (sigma.x_min() > 0 || sigma.x_max() < 0)
            throw std::invalid_argument("CoefficientPair: domain must contain 0");
        if (std::abs(b(0.0)) > 1e-9 * (1.0 + b.max_abs()))
            throw std::invalid_argument("CoefficientPair: normalization b(0) = 0 violated");
    }

    GridFunction sigma_sq() const {
        return sigma.map([](double s) { return s * s; });
    }
};

struct SigmaSweep {
    std::vector<unsigned> ns;
    std::vector<double> deltas;  // sup |Sigma_{n_k} - Sigma_{n_{k-1}}|
};

class SigmaNotConvergedError : public std::runtime_error {
public:
    SigmaNotConvergedError(std::string msg, SigmaSweep sweep)
        : std::runtime_error(std::move(msg)), sweep_(std::move(sweep)) {}
    const SigmaSweep& sweep() const { return sweep_; }

private:
    SigmaSweep sweep_;
};

struct SigmaResult {
    GridFunction sigma_big;  // Sigma with Sigma(0) = 0
    SigmaSweep sweep;        // populated by the mollifier route
    bool unreliable = false; // holder_young with gamma + beta <= 1
};

namespace detail {

inline GridFunction anchored(GridFunction f) {
    double base = f(0.0);
    return f.map([base](double v) { return v - base; });
}

inline GridFunction mollified_sigma_sq(const GridFunction& sigma_sq, const Mollifier& phi,
                                       double cap) {
    auto truncated = sigma_sq.map([cap](double v) { return std::min(v, cap); });
    return mollify(truncated, phi);
}

inline GridFunction mollified_b(const GridFunction& b, const Mollifier& phi, double cap) {
    auto truncated = b.map([cap](double v) { return std::clamp(v, -cap, cap); });
    return mollify(truncated, phi);
}

}  // namespace detail

// Sigma(x) = lim_n 2 int_0^x b_n'/sigma_n^2, computed by the route the caller
// declared (Remark 2.6 constructions, plus the defining mollifier sweep).
inline SigmaResult compute_sigma_big(const CoefficientPair& coeffs,
                                     Mollifier::Kind mollifier_kind = Mollifier::Kind::gaussian,
                                     std::vector<unsigned> sweep_ns = {8, 16, 32, 64}) {
    coeffs.validate();
    auto s2 = coeffs.sigma_sq();
    SigmaResult out;
    switch (coeffs.route) {
        case CoefficientPair::Route::smooth_drift: {
            auto integrand = zip(derivative(coeffs.b), s2, [](double db, double ss) { return 2.0 * db / ss; });
            out.sigma_big = cumulative_trapezoid(integrand, 0.0);
            break;
        }
        case CoefficientPair::Route::close_to_divergence: {
            double s20 = s2(0.0);
            GridFunction logpart = s2.map([&](double v) { return coeffs.alpha * std::log(v / s20); });
            if (coeffs.beta) {
                auto inv_s2 = s2.map([](double v) { return 1.0 / v; });
                auto bv = stieltjes_cumulative(inv_s2, *coeffs.beta, 0.0);
                out.sigma_big = zip(logpart, bv, [](double a, double c) { return a + 2.0 * c; });
            } else {
                out.sigma_big = std::move(logpart);
            }
            break;
        }
        case CoefficientPair::Route::sigma_bv: {
            auto inv_s2 = s2.map([](double v) { return 1.0 / v; });
            auto ls = stieltjes_cumulative(coeffs.b, inv_s2, 0.0);  // int b d(1/sigma^2)
            auto ratio = zip(coeffs.b, s2, [](double bb, double ss) { return 2.0 * bb / ss; });
            double ratio0 = ratio(0.0);
            out.sigma_big = zip(ls, ratio, [ratio0](double l, double r) { return -2.0 * l + r - ratio0; });
            break;
        }
        case CoefficientPair::Route::holder_young: {
            auto inv_s2 = s2.map([](double v) { return 1.0 / v; });
            auto young = regcalc::young_integral(inv_s2, coeffs.b, coeffs.gamma_exp, coeffs.beta_exp, 1e-9);
            out.sigma_big = detail::anchored(young.integral.map([](double v) { return 2.0 * v; }));
            out.unreliable = !young.exponents_ok;
            break;
        }
        case CoefficientPair::Route::mollifier_limit: {
            GridFunction prev;
            bool have_prev = false;
            for (unsigned n : sweep_ns) {
                Mollifier phi{mollifier_kind, n};
                auto s2n = detail::mollified_sigma_sq(s2, phi, static_cast<double>(n));
                auto bn = detail::mollified_b(coeffs.b, phi, static_cast<double>(n));
                auto integrand = zip(derivative(bn), s2n, [](double db, double ss) { return 2.0 * db / ss; });
                auto sig = cumulative_trapezoid(integrand, 0.0);
                out.sweep.ns.push_back(n);
                if (have_prev) {
                    double d = 0;
                    for (std::size_t i = 0; i < sig.size(); ++i)
                        d = std::max(d, std::abs(sig.value(i) - prev.value(i)));
                    out.sweep.deltas.push_back(d);
                }
                prev = std::move(sig);
                have_prev = true;
            }
            auto& dl = out.sweep.deltas;
            bool cauchy = dl.size() < 2 || dl.back() <= dl.front();
            for (std::size_t i = 2; i < dl.size(); ++i)
                if (dl[i] > dl[i - 1] && dl[i - 1] > dl[i - 2]) cauchy = false;
            if (!cauchy)
                throw SigmaNotConvergedError("compute_sigma_big: mollifier sweep not Cauchy", out.sweep);
            out.sigma_big = std::move(prev);
            break;
        }
    }
    return out;
}

// The bundle (Sigma, h, h', h^-1, k, k^-1, sigma_h~, sigma_k-) derived from
// one coefficient pair.
struct ScaleMaps {
    GridFunction Sigma;
    GridFunction h, h_prime, h_inv;
    GridFunction k, k_inv;
    GridFunction sigma_h_tilde;  // on the h-image grid
    GridFunction sigma_k_bar;    // on the k-image grid
};

namespace detail {

// Image-grid resolution: cells no coarser than the image of one x-cell, so
// the composed coefficients are not aliased when the derivative spans several
// e-folds (rough environments).
inline std::size_t image_grid_size(const GridFunction& fwd, const GridFunction& fwd_prime,
                                   std::size_t cap = (1u << 19)) {
    double range = fwd.value(fwd.size() - 1) - fwd.value(0);
    double fine = fwd_prime.min_value() * fwd.dx();
    std::size_t n = fwd.size();
    if (fine > 0 && std::isfinite(range / fine))
        n = std::max(n, static_cast<std::size_t>(std::abs(range) / fine) + 1);
    return std::min(n, cap);
}

}  // namespace detail

inline ScaleMaps build_scale_maps(const CoefficientPair& coeffs, const GridFunction& sigma_big) {
    ScaleMaps m;
    m.Sigma = sigma_big;
    m.h_prime = sigma_big.map([](double s) { return std::exp(-s); });
    m.h = cumulative_trapezoid(m.h_prime, 0.0);
    auto k_prime = zip(sigma_big, coeffs.sigma, [](double s, double sig) { return std::exp(s) / (sig * sig); });
    m.k = cumulative_trapezoid(k_prime, 0.0);
    m.h_inv = invert_monotone(m.h, detail::image_grid_size(m.h, m.h_prime));
    m.k_inv = invert_monotone(m.k, detail::image_grid_size(m.k, k_prime));
    auto sig_h = zip(coeffs.sigma, m.h_prime, [](double s, double hp) { return s * hp; });
    m.sigma_h_tilde = compose(sig_h, m.h_inv);
    auto sig_k = zip(coeffs.sigma, k_prime, [](double s, double kp) { return s * kp; });
    m.sigma_k_bar = compose(sig_k, m.k_inv);
    if (!(m.sigma_h_tilde.min_value() > 0) || !(m.sigma_k_bar.min_value() > 0))
        throw std::runtime_error("build_scale_maps: transformed coefficient not strictly positive");
    return m;
}

// Nonexplosion and Aronson diagnostics on the truncated domain.
struct FeasibilityReport {
    bool nonexplosion_left = false, nonexplosion_right = false;
    std::vector<double> scale_increments_left, scale_increments_right;
    std::vector<double> speed_increments_left, speed_increments_right;
    double aronson_c = 0, aronson_C = 0;
    bool aronson_ok = false;
};

namespace detail {

// Quadrature growth trend of int w over nested windows toward one end.
// Divergent trend = window increments not decaying geometrically.
inline std::pair<bool, std::vector<double>> growth_trend(const GridFunction& w, bool rightward,
                                                         std::size_t windows = 8) {
    double x0 = 0.0;
    double xe = rightward ? w.x_max() : w.x_min();
    std::vector<double> increments;
    double prev_x = x0;
    for (std::size_t j = 1; j <= windows; ++j) {
        double xj = x0 + (xe - x0) * static_cast<double>(j) / static_cast<double>(windows);
        double lo = std::min(prev_x, xj), hi = std::max(prev_x, xj);
        auto ilo = static_cast<std::size_t>(std::llround((lo - w.x_min()) / w.dx()));
        auto ihi = static_cast<std::size_t>(std::llround((hi - w.x_min()) / w.dx()));
        double acc = 0;
        for (std::size_t i = ilo; i < ihi; ++i)
            acc += 0.5 * (w.value(i) + w.value(i + 1)) * w.dx();
        increments.push_back(acc);
        prev_x = xj;
    }
    std::vector<double> ratios;
    for (std::size_t j = increments.size() - 3; j + 1 < increments.size(); ++j)
        ratios.push_back(increments[j + 1] / std::max(increments[j], 1e-300));
    std::sort(ratios.begin(), ratios.end());
    double rho = ratios[ratios.size() / 2];
    return {rho >= 0.75, increments};
}

}  // namespace detail

inline FeasibilityReport feasibility(const CoefficientPair& coeffs, const GridFunction& sigma_big) {
    FeasibilityReport rep;
    auto scale_density = sigma_big.map([](double s) { return std::exp(-s); });
    auto speed_density = zip(sigma_big, coeffs.sigma,
                             [](double s, double sig) { return std::exp(s) / (sig * sig); });
    auto [sr, sri] = detail::growth_trend(scale_density, true);
    auto [sl, sli] = detail::growth_trend(scale_density, false);
    auto [vr, vri] = detail::growth_trend(speed_density, true);
    auto [vl, vli] = detail::growth_trend(speed_density, false);
    rep.scale_increments_right = sri;
    rep.scale_increments_left = sli;
    rep.speed_increments_right = vri;
    rep.speed_increments_left = vli;
    rep.nonexplosion_right = sr && vr;
    rep.nonexplosion_left = sl && vl;
    rep.aronson_c = speed_density.min_value();
    rep.aronson_C = speed_density.max_value();
    rep.aronson_ok = std::isfinite(rep.aronson_C) && rep.aronson_c > 0;
    return rep;
}

enum class TRoute { c1_quadrature, close_to_divergence_closed_form, young };

struct TResult {
    GridFunction f;        // f(0) = 0, f'(0) = x1
    GridFunction f_prime;
    bool unreliable = false;
};

// Solution operator for L f = ell', f(0) = 0, f'(0) = x1:
//   f'(x) = h'(x) (2 int_0^x ell'/(sigma^2 h') + x1).
inline TResult apply_T(const GridFunction& ell, const ScaleMaps& maps, const CoefficientPair& coeffs,
                       double x1 = 0.0, TRoute route = TRoute::c1_quadrature) {
    if (!ell.same_grid(coeffs.sigma)) throw std::invalid_argument("apply_T: ell grid mismatch");
    auto s2 = coeffs.sigma_sq();
    auto k_prime = zip(maps.Sigma, s2, [](double s, double ss) { return std::exp(s) / ss; });
    TResult out;
    switch (route) {
        case TRoute::c1_quadrature: {
            auto integrand = zip(derivative(ell), k_prime, [](double dl, double kp) { return dl * kp; });
            auto inner = cumulative_trapezoid(integrand, 0.0);
            out.f_prime = zip(maps.h_prime, inner, [x1](double hp, double in) { return hp * (2.0 * in + x1); });
            break;
        }
        case TRoute::young: {
            auto young = regcalc::young_integral(k_prime, ell, coeffs.gamma_exp, coeffs.beta_exp, 1e-9);
            auto inner = detail::anchored(young.integral);
            out.f_prime = zip(maps.h_prime, inner, [x1](double hp, double in) { return hp * (2.0 * in + x1); });
            out.unreliable = !young.exponents_ok;
            break;
        }
        case TRoute::close_to_divergence_closed_form: {
            if (coeffs.route != CoefficientPair::Route::close_to_divergence ||
                std::abs(coeffs.alpha - 1.0) > 1e-12)
                throw std::invalid_argument("apply_T: closed form requires close_to_divergence, alpha = 1");
            auto inv_s2 = s2.map([](double v) { return 1.0 / v; });
            GridFunction Bfun =
                coeffs.beta ? stieltjes_cumulative(inv_s2, *coeffs.beta, 0.0)
                            : GridFunction::constant(s2.x_min(), s2.x_max(), s2.size(), 0.0);
            auto e2b = Bfun.map([](double v) { return std::exp(2.0 * v); });
            GridFunction ls_term;
            if (coeffs.beta) {
                auto w = zip(zip(ell, e2b, [](double l, double e) { return l * e; }), inv_s2,
                             [](double le, double is) { return le * is; });
                ls_term = stieltjes_cumulative(w, *coeffs.beta, 0.0);
            } else {
                ls_term = GridFunction::constant(s2.x_min(), s2.x_max(), s2.size(), 0.0);
            }
            double ell0 = ell(0.0);
            double s20 = s2(0.0);
            std::vector<double> fp(s2.size());
            for (std::size_t i = 0; i < s2.size(); ++i) {
                double core = (2.0 / s2.value(i)) *
                              (ell.value(i) - (1.0 / e2b.value(i)) * (ell0 + 2.0 * ls_term.value(i)));
                double hp = s20 / (s2.value(i) * e2b.value(i));  // e^{-Sigma} for this route
                fp[i] = core + x1 * hp;
            }
            out.f_prime = GridFunction(s2.x_min(), s2.x_max(), std::move(fp));
            break;
        }
    }
    out.f = cumulative_trapezoid(out.f_prime, 0.0);
    return out;
}

// hat L f = int_0^x (sigma^2/2 - b) f'' + (b f')(x) - (b f')(0); the
// integrated operator that makes sense for continuous b (E213a form).
// Second derivatives are taken by central differences, so f should be a
// smooth test input on the grid scale.
inline GridFunction hat_L(const GridFunction& f, const CoefficientPair& coeffs) {
    if (!f.same_grid(coeffs.sigma)) throw std::invalid_argument("hat_L: grid mismatch");
    auto fp = derivative(f);
    auto fpp = derivative(fp);
    auto s2 = coeffs.sigma_sq();
    auto w = zip(zip(s2, coeffs.b, [](double ss, double bb) { return ss / 2.0 - bb; }), fpp,
                 [](double a, double d2) { return a * d2; });
    auto integral = cumulative_trapezoid(w, 0.0);
    auto bfp = zip(coeffs.b, fp, [](double bb, double d1) { return bb * d1; });
    double bfp0 = bfp(0.0);
    return zip(integral, bfp, [bfp0](double a, double c) { return a + c - bfp0; });
}

// Phi(g, ell)(x) = (g ell)(x) - (g ell)(0) - int_0^x ell g'  (E3.10 form).
inline GridFunction phi_bilinear(const GridFunction& g, const GridFunction& ell) {
    if (!g.same_grid(ell)) throw std::invalid_argument("phi_bilinear: grid mismatch");
    auto gl = zip(g, ell, [](double a, double b) { return a * b; });
    double gl0 = gl(0.0);
    auto w = zip(ell, derivative(g), [](double l, double dg) { return l * dg; });
    auto integral = cumulative_trapezoid(w, 0.0);
    return zip(gl, integral, [gl0](double a, double c) { return a - gl0 - c; });
}

// Divergence-form normalizer H (H' = after-k diffusivity inverse, H(0) = 0);
// composing with k reproduces h.
inline GridFunction divergence_normalizer(const ScaleMaps& maps) {
    auto inv = maps.sigma_k_bar.map([](double s) { return 1.0 / (s * s); });
    return cumulative_trapezoid(inv, 0.0);
}

}  // namespace irrdrift::scale
