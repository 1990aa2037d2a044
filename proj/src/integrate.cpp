#include "phage/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "phage/errors.hpp"
#include "phage/kernel.hpp"
#include "phage/philox.hpp"
#include "phage/sde_engine.hpp"

namespace phage {

GridConfig GridConfig::aligned(double zeta) const {
    if (!align_to_delay || zeta <= 0.0) {
        return *this;
    }
    const double n = std::max(1.0, std::round(zeta / dt));
    GridConfig out = *this;
    out.dt = zeta / n;
    return out;
}

std::size_t GridConfig::lag_steps(double zeta) const {
    if (zeta <= 0.0) {
        return 0;
    }
    const double r = zeta / dt;
    const double n = std::round(r);
    if (n < 1.0 || std::abs(r - n) > 1e-9 * std::max(1.0, r)) {
        throw InputError(fmt::format("grid dt = {} is not aligned to the delay zeta = {}", dt, zeta));
    }
    return static_cast<std::size_t>(n);
}

InitialCondition InitialCondition::constant(double S0, double Q0) {
    InitialCondition ic;
    ic.family = Family::constant;
    ic.S0 = S0;
    ic.Q0 = Q0;
    return ic;
}

InitialCondition InitialCondition::exponential(double a_S, double a_Q) {
    InitialCondition ic;
    ic.family = Family::exponential;
    ic.a_S = a_S;
    ic.a_Q = a_Q;
    return ic;
}

InitialCondition InitialCondition::reference() { return exponential(4.8, 0.0); }

State InitialCondition::at(double t, const ModelParams& p) const {
    if (family == Family::constant) {
        return {S0, Q0};
    }
    const double g = std::exp(p.alpha * (t + p.zeta));
    return {a_S * g, a_Q * g};
}

std::string to_string(InitialCondition::Family f) {
    return f == InitialCondition::Family::constant ? "constant" : "exponential";
}

std::string to_string(Scheme s) {
    return s == Scheme::euler_maruyama_corrected ? "em" : "heun";
}

Scheme scheme_from_string(const std::string& name) {
    if (name == "em" || name == "euler_maruyama_corrected") {
        return Scheme::euler_maruyama_corrected;
    }
    if (name == "heun" || name == "heun_stratonovich") {
        return Scheme::heun_stratonovich;
    }
    throw InputError("unknown scheme '" + name + "' (expected em or heun)");
}

Vec2 standard_normal_pair(std::uint64_t seed, std::uint64_t path_index, std::uint64_t fine_step) {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(fine_step), static_cast<std::uint32_t>(fine_step >> 32),
                                  static_cast<std::uint32_t>(path_index),
                                  static_cast<std::uint32_t>(path_index >> 32)};
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    const auto r = Philox4x32::apply(ctr, key);
    const std::uint64_t w0 = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
    const std::uint64_t w1 = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
    constexpr double two53 = 0x1p-53;
    const double u1 = static_cast<double>((w0 >> 11) + 1) * two53;  // (0, 1]
    const double u2 = static_cast<double>(w1 >> 11) * two53;        // [0, 1)
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
}

std::vector<Increment> brownian_increments(const NoiseConfig& noise, std::size_t n_steps, double dt) {
    if (n_steps < 1) {
        throw InputError("brownian_increments: n_steps must be >= 1");
    }
    if (!(dt > 0.0)) {
        throw InputError("brownian_increments: dt must be > 0");
    }
    const detail::IncrementSource source(noise, dt);
    std::vector<Increment> out(n_steps);
    for (std::size_t n = 0; n < n_steps; ++n) {
        out[n] = source(n);
    }
    return out;
}

namespace {

// Cubic Lagrange through four consecutive nodes of `states` starting at `first`.
State cubic_through(const std::vector<State>& states, std::size_t first, double x) {
    // x is measured in grid units relative to node `first`.
    const double x0 = x, x1 = x - 1.0, x2 = x - 2.0, x3 = x - 3.0;
    const double w0 = -x1 * x2 * x3 / 6.0;
    const double w1 = x0 * x2 * x3 / 2.0;
    const double w2 = -x0 * x1 * x3 / 2.0;
    const double w3 = x0 * x1 * x2 / 6.0;
    const State& a = states[first];
    const State& b = states[first + 1];
    const State& c = states[first + 2];
    const State& d = states[first + 3];
    return {w0 * a.S + w1 * b.S + w2 * c.S + w3 * d.S, w0 * a.Q + w1 * b.Q + w2 * c.Q + w3 * d.Q};
}

// Interpolate at fractional node position u using nodes 0..last only.
State interpolate(const std::vector<State>& states, double u, std::size_t last) {
    const double nearest = std::round(u);
    if (std::abs(u - nearest) <= 1e-9 && nearest >= 0.0 && nearest <= static_cast<double>(last)) {
        return states[static_cast<std::size_t>(nearest)];
    }
    if (last < 3) {
        const auto i = static_cast<std::size_t>(std::clamp(std::floor(u), 0.0, static_cast<double>(last - 1)));
        const double w = u - static_cast<double>(i);
        const State& a = states[i];
        const State& b = states[i + 1];
        return {a.S + w * (b.S - a.S), a.Q + w * (b.Q - a.Q)};
    }
    const double base = std::floor(u) - 1.0;
    const auto first = static_cast<std::size_t>(std::clamp(base, 0.0, static_cast<double>(last - 3)));
    return cubic_through(states, first, u - static_cast<double>(first));
}

}  // namespace

State history_lookup(const HistoryTrajectory& hist, double t) {
    if (hist.empty()) {
        throw InputError("history_lookup on empty history");
    }
    const double slack = 1e-9 * hist.dt;
    if (t < hist.t0 - slack || t > hist.end_time() + slack) {
        throw InputError(fmt::format("history_lookup: t = {} outside [{}, {}]", t, hist.t0, hist.end_time()));
    }
    if (hist.size() == 1) {
        return hist.states.front();
    }
    const double u = (t - hist.t0) / hist.dt;
    return interpolate(hist.states, u, hist.size() - 1);
}

namespace detail {

GridPlan plan_grid(const ModelParams& p, const GridConfig& grid, bool delayed) {
    p.validate();
    if (!(grid.dt > 0.0) || !(grid.t_end > 0.0)) {
        throw InputError("grid needs dt > 0 and t_end > 0");
    }
    GridPlan plan;
    plan.delayed = delayed && p.zeta > 0.0;
    plan.grid = plan.delayed ? grid.aligned(p.zeta) : grid;
    plan.lag = plan.delayed ? plan.grid.lag_steps(p.zeta) : 0;
    plan.t0 = plan.delayed ? -static_cast<double>(plan.lag) * plan.grid.dt : 0.0;
    plan.n_steps = static_cast<std::size_t>(std::ceil(plan.grid.t_end / plan.grid.dt - 1e-9));
    if (plan.n_steps == 0) {
        plan.n_steps = 1;
    }
    return plan;
}

}  // namespace detail

namespace {

void check_step(const State& y, double t, double dt) {
    if (!is_finite(y)) {
        throw IntegrationError(fmt::format("non-finite state at t = {}", t), t - dt);
    }
}

Vec2 axpy(const State& x, double h, const Vec2& k) { return {x.S + h * k[0], x.Q + h * k[1]}; }

}  // namespace

HistoryTrajectory integrate_deterministic(const ModelParams& p, const InitialCondition& init,
                                          const GridConfig& grid, bool delayed) {
    const detail::GridPlan plan = detail::plan_grid(p, grid, delayed);
    const DriftKernel kernel(p);
    const double dt = plan.grid.dt;
    const std::size_t L = plan.lag;

    HistoryTrajectory out;
    out.t0 = plan.t0;
    out.dt = dt;
    out.states.reserve(L + plan.n_steps + 1);
    for (std::size_t i = 0; i <= L; ++i) {
        const double t = (i == L) ? 0.0 : plan.t0 + static_cast<double>(i) * dt;
        out.states.push_back(init.at(t, p));
    }

    auto& zs = out.states;
    for (std::size_t n = 0; n < plan.n_steps; ++n) {
        const std::size_t j = L + n;
        const State x = zs[j];
        Vec2 k1, k2, k3, k4;
        if (plan.delayed) {
            const State lag0 = zs[j - L];
            const State lag_half = interpolate(zs, static_cast<double>(j - L) + 0.5, j);
            const State lag1 = zs[j - L + 1];
            k1 = kernel.delayed(x, lag0);
            const auto a = axpy(x, 0.5 * dt, k1);
            k2 = kernel.delayed({a[0], a[1]}, lag_half);
            const auto b = axpy(x, 0.5 * dt, k2);
            k3 = kernel.delayed({b[0], b[1]}, lag_half);
            const auto c = axpy(x, dt, k3);
            k4 = kernel.delayed({c[0], c[1]}, lag1);
        } else {
            k1 = kernel.nondelayed(x);
            const auto a = axpy(x, 0.5 * dt, k1);
            k2 = kernel.nondelayed({a[0], a[1]});
            const auto b = axpy(x, 0.5 * dt, k2);
            k3 = kernel.nondelayed({b[0], b[1]});
            const auto c = axpy(x, dt, k3);
            k4 = kernel.nondelayed({c[0], c[1]});
        }
        const State y{x.S + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                      x.Q + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])};
        const double t = static_cast<double>(n + 1) * dt;
        check_step(y, t, dt);
        zs.push_back(y);
    }
    return out;
}

namespace {

PositivityReport scan_positivity(const HistoryTrajectory& traj) {
    PositivityReport rep;
    rep.min_S = std::numeric_limits<double>::infinity();
    rep.min_Q = std::numeric_limits<double>::infinity();
    for (char comp : {'S', 'Q'}) {
        bool open = false;
        NegativeExcursion cur;
        for (std::size_t i = 0; i < traj.size(); ++i) {
            const double v = comp == 'S' ? traj.states[i].S : traj.states[i].Q;
            double& lowest = comp == 'S' ? rep.min_S : rep.min_Q;
            lowest = std::min(lowest, v);
            if (v < 0.0) {
                if (!open) {
                    cur = {comp, traj.time(i), traj.time(i), v, 0};
                    open = true;
                }
                cur.t_end = traj.time(i);
                cur.min_value = std::min(cur.min_value, v);
                ++cur.nodes;
            } else if (open) {
                rep.excursions.push_back(cur);
                open = false;
            }
        }
        if (open) {
            rep.excursions.push_back(cur);
        }
    }
    std::sort(rep.excursions.begin(), rep.excursions.end(),
              [](const auto& a, const auto& b) { return a.t_start < b.t_start; });
    return rep;
}

}  // namespace

HistoryTrajectory integrate_sde_path(const ModelParams& p, const InitialCondition& init,
                                     const NoiseConfig& noise, const GridConfig& grid, bool delayed) {
    const detail::GridPlan plan = detail::plan_grid(p, grid, delayed);
    HistoryTrajectory out;
    out.t0 = plan.t0;
    out.dt = plan.grid.dt;
    out.states.reserve(plan.lag + plan.n_steps + 1);
    detail::run_sde(p, init, noise, plan, [&](std::size_t, double, const State& z) {
        out.states.push_back(z);
        return true;
    });
    out.positivity = scan_positivity(out);
    return out;
}

}  // namespace phage
