#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace irrdrift {

// A real function sampled on a uniform grid over a truncated domain,
// evaluated by linear interpolation and extended by its boundary values
// outside [x_min, x_max] (constant extension). Immutable once built; the
// universal carrier for sigma, b, Sigma, h, k and u(t,.).
class GridFunction {
public:
    GridFunction() = default;

    GridFunction(double x_min, double x_max, std::vector<double> values)
        : x_min_(x_min), x_max_(x_max), values_(std::move(values)) {
        if (!(x_min_ < x_max_)) throw std::invalid_argument("GridFunction: x_min must be < x_max");
        if (values_.size() < 2) throw std::invalid_argument("GridFunction: need at least 2 points");
    }

    static GridFunction sample(double x_min, double x_max, std::size_t n,
                               const std::function<double(double)>& f) {
        if (n < 2) throw std::invalid_argument("GridFunction::sample: n < 2");
        std::vector<double> v(n);
        double dx = (x_max - x_min) / static_cast<double>(n - 1);
        for (std::size_t i = 0; i < n; ++i) v[i] = f(x_min + static_cast<double>(i) * dx);
        return GridFunction(x_min, x_max, std::move(v));
    }

    static GridFunction constant(double x_min, double x_max, std::size_t n, double c) {
        return GridFunction(x_min, x_max, std::vector<double>(n, c));
    }

    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    std::size_t size() const { return values_.size(); }
    double dx() const { return (x_max_ - x_min_) / static_cast<double>(values_.size() - 1); }
    double node(std::size_t i) const { return x_min_ + static_cast<double>(i) * dx(); }
    const std::vector<double>& values() const { return values_; }
    double value(std::size_t i) const { return values_[i]; }

    // Piecewise-linear interpolation, clamped to the boundary values.
    double operator()(double x) const {
        if (x <= x_min_) return values_.front();
        if (x >= x_max_) return values_.back();
        double t = (x - x_min_) / dx();
        double r = std::round(t);
        if (std::abs(t - r) < 1e-9) {  // snap: node queries return the stored value exactly
            auto k = static_cast<std::size_t>(r);
            if (k < values_.size()) return values_[k];
        }
        auto i = static_cast<std::size_t>(t);
        if (i >= values_.size() - 1) i = values_.size() - 2;
        double w = t - static_cast<double>(i);
        return values_[i] + w * (values_[i + 1] - values_[i]);
    }

    double min_value() const { return *std::min_element(values_.begin(), values_.end()); }
    double max_value() const { return *std::max_element(values_.begin(), values_.end()); }
    double max_abs() const {
        double m = 0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    bool same_grid(const GridFunction& o) const {
        return values_.size() == o.values_.size() && x_min_ == o.x_min_ && x_max_ == o.x_max_;
    }

    GridFunction map(const std::function<double(double)>& fn) const {
        std::vector<double> v(values_.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(values_[i]);
        return GridFunction(x_min_, x_max_, std::move(v));
    }

    // Representation error scale for C^2 functions: dx^2 * max|f''| / 8,
    // with f'' estimated from the grid itself.
    double interpolation_tolerance() const;

private:
    double x_min_ = 0, x_max_ = 1;
    std::vector<double> values_;
};

inline GridFunction zip(const GridFunction& a, const GridFunction& b,
                        const std::function<double(double, double)>& fn) {
    if (!a.same_grid(b)) throw std::invalid_argument("zip: mismatched grids");
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(a.value(i), b.value(i));
    return GridFunction(a.x_min(), a.x_max(), std::move(v));
}

// Central differences, second-order one-sided at the ends.
inline GridFunction derivative(const GridFunction& f) {
    std::size_t n = f.size();
    double h = f.dx();
    std::vector<double> d(n);
    if (n == 2) {
        d[0] = d[1] = (f.value(1) - f.value(0)) / h;
    } else {
        d[0] = (-3.0 * f.value(0) + 4.0 * f.value(1) - f.value(2)) / (2 * h);
        d[n - 1] = (3.0 * f.value(n - 1) - 4.0 * f.value(n - 2) + f.value(n - 3)) / (2 * h);
        for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f.value(i + 1) - f.value(i - 1)) / (2 * h);
    }
    return GridFunction(f.x_min(), f.x_max(), std::move(d));
}

inline GridFunction second_derivative(const GridFunction& f) { return derivative(derivative(f)); }

inline double GridFunction::interpolation_tolerance() const {
    GridFunction f2 = second_derivative(*this);
    return dx() * dx() * f2.max_abs() / 8.0;
}

// Trapezoid quadrature over the whole domain.
inline double trapezoid(const GridFunction& f) {
    double s = 0.5 * (f.value(0) + f.value(f.size() - 1));
    for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f.value(i);
    return s * f.dx();
}

namespace detail {

inline double interp_in(const std::vector<double>& F, double x_min, double dx, double x) {
    double t = (x - x_min) / dx;
    if (t <= 0) return F.front();
    if (t >= static_cast<double>(F.size() - 1)) return F.back();
    auto i = static_cast<std::size_t>(t);
    double w = t - static_cast<double>(i);
    return F[i] + w * (F[i + 1] - F[i]);
}

}  // namespace detail

// Running trapezoid primitive anchored so that F(anchor) = 0 (anchor value
// taken by interpolation; exact when the anchor is a node).
inline GridFunction cumulative_trapezoid(const GridFunction& f, double anchor = 0.0) {
    std::size_t n = f.size();
    std::vector<double> F(n, 0.0);
    for (std::size_t i = 1; i < n; ++i)
        F[i] = F[i - 1] + 0.5 * (f.value(i - 1) + f.value(i)) * f.dx();
    if (anchor < f.x_min() || anchor > f.x_max())
        throw std::invalid_argument("cumulative_trapezoid: anchor outside domain");
    double base = detail::interp_in(F, f.x_min(), f.dx(), anchor);
    for (auto& v : F) v -= base;
    return GridFunction(f.x_min(), f.x_max(), std::move(F));
}

// Lebesgue-Stieltjes running integral of w against d(mu) on the common grid,
// trapezoid in the integrand, anchored at `anchor`.
inline GridFunction stieltjes_cumulative(const GridFunction& w, const GridFunction& mu,
                                         double anchor = 0.0) {
    if (!w.same_grid(mu)) throw std::invalid_argument("stieltjes_cumulative: mismatched grids");
    std::size_t n = w.size();
    std::vector<double> F(n, 0.0);
    for (std::size_t i = 1; i < n; ++i)
        F[i] = F[i - 1] + 0.5 * (w.value(i - 1) + w.value(i)) * (mu.value(i) - mu.value(i - 1));
    double base = detail::interp_in(F, w.x_min(), w.dx(), anchor);
    for (auto& v : F) v -= base;
    return GridFunction(w.x_min(), w.x_max(), std::move(F));
}

// (f o g), sampled on g's grid.
inline GridFunction compose(const GridFunction& f, const GridFunction& g) {
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(g.value(i));
    return GridFunction(g.x_min(), g.x_max(), std::move(v));
}

struct HolderEstimate {
    double gamma = 0;
    double norm = 0;   // sup over sampled node pairs of |f(t)-f(s)| / |t-s|^gamma
    double a = 0, b = 0;
};

inline HolderEstimate holder_norm(const GridFunction& f, double gamma, double a, double b) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("holder_norm: gamma outside (0,1)");
    if (a < f.x_min() - 1e-12 || b > f.x_max() + 1e-12 || !(a < b))
        throw std::invalid_argument("holder_norm: [a,b] outside domain");
    auto lo = static_cast<std::size_t>(std::ceil((a - f.x_min()) / f.dx() - 1e-9));
    auto hi = static_cast<std::size_t>(std::floor((b - f.x_min()) / f.dx() + 1e-9));
    hi = std::min(hi, f.size() - 1);
    double best = 0;
    for (std::size_t i = lo; i <= hi; ++i) {
        for (std::size_t j = i + 1; j <= hi; ++j) {
            double num = std::abs(f.value(j) - f.value(i));
            double den = std::pow(static_cast<double>(j - i) * f.dx(), gamma);
            best = std::max(best, num / den);
        }
    }
    return HolderEstimate{gamma, best, a, b};
}

// Mollifier Phi with unit mass; Phi_n(x) = n*Phi(n*x).
struct Mollifier {
    enum class Kind { gaussian, compact_bump };
    Kind kind = Kind::gaussian;
    unsigned n = 1;

    // Effective half-width of Phi_n's support.
    double half_width() const {
        return kind == Kind::gaussian ? 8.0 / static_cast<double>(n) : 1.0 / static_cast<double>(n);
    }

    double base_kernel(double x) const {
        if (kind == Kind::gaussian)
            return std::exp(-0.5 * x * x) / 2.506628274631000502415765284811;
        double r = 1.0 - x * x;
        if (r <= 0) return 0.0;
        // normalization of exp(-1/(1-x^2)) on (-1,1)
        return std::exp(-1.0 / r) / 0.44399381616807943782304825105857;
    }

    double operator()(double x) const {
        return static_cast<double>(n) * base_kernel(static_cast<double>(n) * x);
    }
};

// Discrete convolution f * Phi_n by quadrature; output on the same grid,
// clamped extension of f beyond the domain. Kernel weights are normalized to
// unit mass so constants are reproduced exactly.
inline GridFunction mollify(const GridFunction& f, const Mollifier& phi) {
    double hw = phi.half_width();
    if (2.0 * hw >= f.x_max() - f.x_min())
        throw std::invalid_argument("mollify: mollifier support exceeds domain length");
    double step = std::min(f.dx(), hw / 32.0);
    auto K = static_cast<std::size_t>(std::ceil(hw / step));
    std::vector<double> w(2 * K + 1);
    double total = 0;
    for (std::size_t j = 0; j < w.size(); ++j) {
        double y = (static_cast<double>(j) - static_cast<double>(K)) * step;
        double wt = phi(y) * step;
        if (j == 0 || j + 1 == w.size()) wt *= 0.5;
        w[j] = wt;
        total += wt;
    }
    for (auto& wt : w) wt /= total;
    std::vector<double> out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        double x = f.node(i), acc = 0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            double y = (static_cast<double>(j) - static_cast<double>(K)) * step;
            acc += w[j] * f(x - y);
        }
        out[i] = acc;
    }
    return GridFunction(f.x_min(), f.x_max(), std::move(out));
}

// Inverse of a strictly monotone grid function, on [min f, max f].
// n_out controls the output resolution (0: same node count as the input).
inline GridFunction invert_monotone(const GridFunction& f, std::size_t n_out = 0) {
    std::size_t n = f.size();
    int dir = f.value(1) > f.value(0) ? 1 : -1;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double d = f.value(i + 1) - f.value(i);
        if (!(dir > 0 ? d > 0 : d < 0))
            throw std::invalid_argument("invert_monotone: not strictly monotone between nodes " +
                                        std::to_string(i) + " and " + std::to_string(i + 1));
    }
    if (n_out == 0) n_out = n;
    double y_min = std::min(f.value(0), f.value(n - 1));
    double y_max = std::max(f.value(0), f.value(n - 1));
    std::vector<double> out(n_out);
    double dy = (y_max - y_min) / static_cast<double>(n_out - 1);
    std::size_t seg = 0;  // advancing bracket; y targets are monotone
    for (std::size_t i = 0; i < n_out; ++i) {
        double y = (dir > 0) ? y_min + static_cast<double>(i) * dy
                             : y_max - static_cast<double>(i) * dy;
        double ylo = f.value(seg), yhi = f.value(seg + 1);
        auto inside = [&](double v) {
            return dir > 0 ? (v >= ylo && v <= yhi) : (v <= ylo && v >= yhi);
        };
        while (!inside(y) && seg + 2 < n) {
            ++seg;
            ylo = f.value(seg);
            yhi = f.value(seg + 1);
        }
        double w = (yhi == ylo) ? 0.0 : (y - ylo) / (yhi - ylo);
        w = std::clamp(w, 0.0, 1.0);
        double x = f.node(seg) + w * f.dx();
        out[dir > 0 ? i : n_out - 1 - i] = x;  // output indexed by ascending y
    }
    return GridFunction(y_min, y_max, std::move(out));
}

}  // namespace irrdrift
