#pragma once

// Streaming stochastic stepper shared by integrate_sde_path and the ensemble
// estimators. The observer sees every grid node (initial segment included) and
// may stop the run early by returning false.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include <fmt/format.h>

#include "phage/errors.hpp"
#include "phage/integrate.hpp"
#include "phage/kernel.hpp"

namespace phage::detail {

struct GridPlan {
    GridConfig grid;
    bool delayed = false;
    std::size_t lag = 0;      // steps per delay
    std::size_t n_steps = 0;  // steps after t = 0
    double t0 = 0.0;
};

GridPlan plan_grid(const ModelParams& p, const GridConfig& grid, bool delayed);

class IncrementSource {
public:
    IncrementSource(const NoiseConfig& noise, double dt)
        : seed_(noise.seed),
          path_(noise.path_index),
          substeps_(noise.substeps == 0 ? 1 : noise.substeps),
          sqrt_fine_dt_(std::sqrt(dt / static_cast<double>(substeps_))) {}

    Increment operator()(std::uint64_t step) const {
        Increment dw{0.0, 0.0};
        const std::uint64_t first = step * substeps_;
        for (std::uint32_t j = 0; j < substeps_; ++j) {
            const Vec2 z = standard_normal_pair(seed_, path_, first + j);
            dw[0] += sqrt_fine_dt_ * z[0];
            dw[1] += sqrt_fine_dt_ * z[1];
        }
        return dw;
    }

private:
    std::uint64_t seed_;
    std::uint64_t path_;
    std::uint32_t substeps_;
    double sqrt_fine_dt_;
};

template <class Observer>
void run_sde(const ModelParams& p, const InitialCondition& init, const NoiseConfig& noise,
             const GridPlan& plan, Observer&& observe) {
    const DriftKernel kernel(p);
    const double dt = plan.grid.dt;
    const std::size_t L = plan.lag;
    const std::size_t ring_size = L + 1;
    std::vector<State> ring(ring_size);

    for (std::size_t i = 0; i <= L; ++i) {
        const double t = (i == L) ? 0.0 : plan.t0 + static_cast<double>(i) * dt;
        ring[i] = init.at(t, p);
        if (!observe(i, t, ring[i])) {
            return;
        }
    }

    const double eps = noise.eps;
    const bool noisy = eps != 0.0;
    const bool heun = noise.scheme == Scheme::heun_stratonovich;
    const IncrementSource increments(noise, dt);

    std::size_t cur = L;  // ring slot of node j
    for (std::size_t n = 0; n < plan.n_steps; ++n) {
        const std::size_t j = L + n;
        const std::size_t next = (cur + 1 == ring_size) ? 0 : cur + 1;
        const State x = ring[cur];
        const State lag = ring[next];  // node j - L, about to be overwritten
        const Increment dw = noisy ? increments(n) : Increment{0.0, 0.0};

        State y;
        if (!heun) {
            const Vec2 f = plan.delayed ? kernel.delayed(x, lag) : kernel.nondelayed(x);
            if (noisy) {
                const Vec2 c = kernel.correction(x, eps);
                const Vec2 g = kernel.diffusion(x, eps);
                y = {x.S + (f[0] + c[0]) * dt + g[0] * dw[0], x.Q + (f[1] + c[1]) * dt + g[1] * dw[1]};
            } else {
                y = {x.S + f[0] * dt, x.Q + f[1] * dt};
            }
        } else {
            // Lag for the corrector stage is node j + 1 - L.
            const State& lag_next = (L == 0) ? lag : ring[next + 1 == ring_size ? 0 : next + 1];
            const Vec2 f0 = plan.delayed ? kernel.delayed(x, lag) : kernel.nondelayed(x);
            const Vec2 g0 = kernel.diffusion(x, eps);
            const State pred{x.S + f0[0] * dt + g0[0] * dw[0], x.Q + f0[1] * dt + g0[1] * dw[1]};
            const Vec2 f1 = plan.delayed ? kernel.delayed(pred, lag_next)
                                         : kernel.nondelayed(pred);
            const Vec2 g1 = kernel.diffusion(pred, eps);
            y = {x.S + 0.5 * (f0[0] + f1[0]) * dt + 0.5 * (g0[0] + g1[0]) * dw[0],
                 x.Q + 0.5 * (f0[1] + f1[1]) * dt + 0.5 * (g0[1] + g1[1]) * dw[1]};
        }

        const double t = static_cast<double>(n + 1) * dt;
        if (!is_finite(y)) {
            throw IntegrationError(fmt::format("non-finite state at t = {}", t), t - dt);
        }
        ring[next] = y;
        cur = next;
        if (!observe(j + 1, t, y)) {
            return;
        }
    }
}

}  // namespace phage::detail
