#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace phage {

/// Bacteria (S) and phage (Q) concentrations, in tens of millions of units.
struct State {
    double S = 0.0;
    double Q = 0.0;

    friend bool operator==(const State&, const State&) = default;
};

using Vec2 = std::array<double, 2>;

inline double distance(const State& a, const State& b) {
    return std::hypot(a.S - b.S, a.Q - b.Q);
}

inline bool is_finite(const State& z) {
    return std::isfinite(z.S) && std::isfinite(z.Q);
}

/// Closed time or value interval [lo, hi].
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double x) const { return lo <= x && x <= hi; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

/// One contiguous run of grid nodes where a component was negative.
struct NegativeExcursion {
    char component = 'S';
    double t_start = 0.0;
    double t_end = 0.0;
    double min_value = 0.0;
    std::size_t nodes = 0;
};

/// Negative-state monitoring attached to stochastic trajectories. States are
/// never clamped; every negative run is listed here.
struct PositivityReport {
    std::vector<NegativeExcursion> excursions;
    double min_S = 0.0;
    double min_Q = 0.0;

    bool clean(double threshold = 0.0) const {
        return min_S >= -threshold && min_Q >= -threshold;
    }
};

/// Uniform-grid trajectory. Delayed runs start at t0 = -zeta so the initial
/// history segment is part of the record.
struct HistoryTrajectory {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<State> states;
    PositivityReport positivity;

    std::size_t size() const { return states.size(); }
    bool empty() const { return states.empty(); }
    double time(std::size_t i) const { return t0 + static_cast<double>(i) * dt; }
    double end_time() const { return states.empty() ? t0 : time(states.size() - 1); }
};

}  // namespace phage
