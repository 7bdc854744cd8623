#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "grid_function.hpp"
#include "rng.hpp"
#include "sample_path.hpp"

namespace irrdrift::noise {

namespace detail {

// In-place iterative radix-2 FFT, power-of-2 sizes only.
inline void fft(std::vector<std::complex<double>>& a) {
    std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft: size not a power of 2");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = -2.0 * 3.14159265358979323846 / static_cast<double>(len);
        std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                auto u = a[i + k];
                auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

// Autocovariance of fractional Gaussian noise increments at step dt.
inline double fgn_cov(std::size_t lag, double hurst, double dt) {
    double k = static_cast<double>(lag);
    double two_h = 2.0 * hurst;
    return 0.5 * std::pow(dt, two_h) *
           (std::pow(k + 1.0, two_h) + std::pow(std::abs(k - 1.0), two_h) -
            2.0 * std::pow(k, two_h));
}

}  // namespace detail

enum class FbmMethod { circulant, cholesky };

// Brownian path: partial sums of iid N(0, dt) increments, W(t0) = 0.
inline SamplePath gen_bm(std::uint64_t seed, double t0, double dt, std::size_t n) {
    if (n < 1 || !(dt > 0)) throw std::invalid_argument("gen_bm: need n >= 1 and dt > 0");
    SamplePath p;
    p.t0 = t0;
    p.dt = dt;
    p.seed = seed;
    p.kind = SamplePath::Kind::bm;
    p.values.resize(n);
    p.values[0] = 0.0;
    double s = std::sqrt(dt);
    for (std::size_t i = 1; i < n; ++i)
        p.values[i] = p.values[i - 1] + s * rng::normal(seed, 0, i - 1);
    return p;
}

// Fractional Brownian path with exact covariance: circulant embedding of the
// increment covariance (Davies-Harte), Cholesky fallback when the embedding
// is not nonnegative. B(t0) = 0.
inline SamplePath gen_fbm(std::uint64_t seed, double hurst, double t0, double dt, std::size_t n,
                          FbmMethod* method_used = nullptr) {
    if (!(hurst > 0.0 && hurst < 1.0)) throw std::invalid_argument("gen_fbm: hurst outside (0,1)");
    if (n < 1 || !(dt > 0)) throw std::invalid_argument("gen_fbm: need n >= 1 and dt > 0");
    SamplePath p;
    p.t0 = t0;
    p.dt = dt;
    p.seed = seed;
    p.kind = SamplePath::Kind::fbm;
    p.hurst = hurst;
    p.values.assign(n, 0.0);
    if (n == 1) {
        if (method_used) *method_used = FbmMethod::circulant;
        return p;
    }
    std::size_t m = n - 1;  // number of increments
    std::size_t big = 1;
    while (big < 2 * m) big <<= 1;

    std::vector<std::complex<double>> row(big);
    for (std::size_t j = 0; j <= big / 2; ++j) row[j] = detail::fgn_cov(j, hurst, dt);
    for (std::size_t j = big / 2 + 1; j < big; ++j) row[j] = row[big - j];
    detail::fft(row);
    double min_eig = 0, max_eig = 0;
    for (auto& z : row) {
        min_eig = std::min(min_eig, z.real());
        max_eig = std::max(max_eig, z.real());
    }

    std::vector<double> incr(m);
    if (min_eig > -1e-9 * std::max(1.0, max_eig)) {
        if (method_used) *method_used = FbmMethod::circulant;
        std::vector<std::complex<double>> a(big);
        double inv = 1.0 / static_cast<double>(big);
        auto lam = [&](std::size_t j) { return std::max(0.0, row[j].real()); };
        a[0] = std::sqrt(lam(0) * inv) * rng::normal(seed, 1, 0);
        a[big / 2] = std::sqrt(lam(big / 2) * inv) * rng::normal(seed, 1, 1);
        for (std::size_t j = 1; j < big / 2; ++j) {
            double r = std::sqrt(0.5 * lam(j) * inv);
            double u = rng::normal(seed, 1, 2 * j);
            double v = rng::normal(seed, 1, 2 * j + 1);
            a[j] = std::complex<double>(r * u, r * v);
            a[big - j] = std::conj(a[j]);
        }
        detail::fft(a);
        for (std::size_t i = 0; i < m; ++i) incr[i] = a[i].real();
    } else {
        if (method_used) *method_used = FbmMethod::cholesky;
        if (m > 4096) throw std::runtime_error("gen_fbm: embedding failed and n too large for Cholesky");
        std::vector<double> L(m * m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                double s = detail::fgn_cov(i - j, hurst, dt);
                for (std::size_t k = 0; k < j; ++k) s -= L[i * m + k] * L[j * m + k];
                if (i == j) {
                    if (s <= 0) throw std::runtime_error("gen_fbm: covariance not positive definite");
                    L[i * m + i] = std::sqrt(s);
                } else {
                    L[i * m + j] = s / L[j * m + j];
                }
            }
        }
        std::vector<double> z(m);
        for (std::size_t i = 0; i < m; ++i) z[i] = rng::normal(seed, 1, i);
        for (std::size_t i = 0; i < m; ++i) {
            double s = 0;
            for (std::size_t k = 0; k <= i; ++k) s += L[i * m + k] * z[k];
            incr[i] = s;
        }
    }
    for (std::size_t i = 1; i < n; ++i) p.values[i] = p.values[i - 1] + incr[i - 1];
    return p;
}

// Space-indexed random environment: two independent fBm branches glued at
// x = 0 with value exactly 0, on [-L, L].
struct Environment {
    GridFunction path;  // eta as a function of x
    double hurst = 0.5;
    std::uint64_t seed = 0;
    bool spde_ok = true;  // hurst >= 1/3, fit for the SPDE pipeline

    double max_abs() const { return path.max_abs(); }
};

inline Environment gen_environment(std::uint64_t seed, double hurst, double L, std::size_t n,
                                   bool for_spde = false) {
    if (!(hurst > 0.0 && hurst < 1.0))
        throw std::invalid_argument("gen_environment: hurst outside (0,1)");
    if (!(L > 0) || n < 3) throw std::invalid_argument("gen_environment: need L > 0, n >= 3");
    if (n % 2 == 0) ++n;  // keep x = 0 on the grid
    bool ok = hurst >= 1.0 / 3.0 - 1e-12;
    if (for_spde && !ok)
        throw std::invalid_argument("gen_environment: hurst < 1/3 not admissible for the SPDE pipeline");
    std::size_t half = (n - 1) / 2;
    double dx = 2.0 * L / static_cast<double>(n - 1);
    SamplePath right = gen_fbm(rng::sub_seed(seed, 1), hurst, 0.0, dx, half + 1);
    SamplePath left = gen_fbm(rng::sub_seed(seed, 2), hurst, 0.0, dx, half + 1);
    std::vector<double> v(n);
    v[half] = 0.0;
    for (std::size_t k = 1; k <= half; ++k) {
        v[half + k] = right.values[k];
        v[half - k] = left.values[k];
    }
    Environment env;
    env.path = GridFunction(-L, L, std::move(v));
    env.hurst = hurst;
    env.seed = seed;
    env.spde_ok = ok;
    return env;
}

}  // namespace irrdrift::noise
