#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace irrdrift {

// One realization of a time-indexed process on a uniform grid.
// (seed, kind, dt, length) reproduce the values bit-for-bit.
struct SamplePath {
    enum class Kind { bm, fbm, deterministic };

    double t0 = 0;
    double dt = 0;
    std::vector<double> values;
    std::uint64_t seed = 0;
    Kind kind = Kind::deterministic;
    double hurst = 0.5;  // meaningful for kind == fbm

    std::size_t size() const { return values.size(); }
    double time(std::size_t i) const { return t0 + static_cast<double>(i) * dt; }
    double horizon() const { return time(values.empty() ? 0 : values.size() - 1); }
    double front() const { return values.front(); }
    double back() const { return values.back(); }

    // Index clamped to [0, size-1]: the constant-extension convention.
    double at_clamped(std::ptrdiff_t i) const {
        if (i < 0) i = 0;
        auto n = static_cast<std::ptrdiff_t>(values.size());
        if (i >= n) i = n - 1;
        return values[static_cast<std::size_t>(i)];
    }

    bool same_grid(const SamplePath& o) const {
        return values.size() == o.values.size() && t0 == o.t0 && dt == o.dt;
    }

    static SamplePath deterministic_path(double t0, double dt, std::vector<double> v) {
        SamplePath p;
        p.t0 = t0;
        p.dt = dt;
        p.values = std::move(v);
        p.kind = Kind::deterministic;
        if (p.values.empty()) throw std::invalid_argument("SamplePath: empty");
        return p;
    }

    template <class Fn>
    static SamplePath from_function(double t0, double dt, std::size_t n, Fn&& f) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = f(t0 + static_cast<double>(i) * dt);
        return deterministic_path(t0, dt, std::move(v));
    }
};

}  // namespace irrdrift
