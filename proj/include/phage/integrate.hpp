#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "phage/model.hpp"
#include "phage/types.hpp"

namespace phage {

struct GridConfig {
    double dt = 1e-4;
    double t_end = 1.0;
    bool align_to_delay = true;

    /// With align_to_delay and zeta > 0, dt becomes zeta / round(zeta / dt).
    GridConfig aligned(double zeta) const;

    /// Number of steps spanning the delay. Throws InputError when the grid is
    /// not aligned to zeta.
    std::size_t lag_steps(double zeta) const;

    friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

/// Initial history on [-zeta, 0]: either constant or the exponential family
/// S(t) = a_S e^{alpha (t + zeta)}, Q(t) = a_Q e^{alpha (t + zeta)}.
struct InitialCondition {
    enum class Family { constant, exponential };

    Family family = Family::constant;
    double S0 = 0.0;
    double Q0 = 0.0;
    double a_S = 0.0;
    double a_Q = 0.0;

    static InitialCondition constant(double S0, double Q0);
    static InitialCondition exponential(double a_S, double a_Q);
    /// 4.8 e^{alpha (t + zeta)} bacteria and no phage.
    static InitialCondition reference();

    State at(double t, const ModelParams& p) const;

    friend bool operator==(const InitialCondition&, const InitialCondition&) = default;
};

std::string to_string(InitialCondition::Family f);

enum class Scheme { euler_maruyama_corrected, heun_stratonovich };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& name);

struct NoiseConfig {
    double eps = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0;
    Scheme scheme = Scheme::euler_maruyama_corrected;
    /// Fine Brownian steps summed into each integration step. Paths at dt and
    /// dt/k share a Brownian path when the coarse run uses k times the substeps.
    std::uint32_t substeps = 1;
};

using Increment = Vec2;

/// Gaussian increments keyed on (seed, path_index, fine step). Step n is the
/// in-order sum of fine draws n*substeps .. n*substeps + substeps - 1, each
/// with variance dt / substeps.
std::vector<Increment> brownian_increments(const NoiseConfig& noise, std::size_t n_steps, double dt);

/// Standard normal pair for one fine step.
Vec2 standard_normal_pair(std::uint64_t seed, std::uint64_t path_index, std::uint64_t fine_step);

/// Exact stored value on grid nodes, cubic Lagrange interpolation between them.
State history_lookup(const HistoryTrajectory& hist, double t);

/// Classical RK4. Delayed runs read the lag through cubic interpolation of the
/// stored history and include the initial segment [-zeta, 0].
HistoryTrajectory integrate_deterministic(const ModelParams& p, const InitialCondition& init,
                                          const GridConfig& grid, bool delayed);

HistoryTrajectory integrate_sde_path(const ModelParams& p, const InitialCondition& init,
                                     const NoiseConfig& noise, const GridConfig& grid, bool delayed);

}  // namespace phage
