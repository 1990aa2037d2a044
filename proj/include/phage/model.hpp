#pragma once

#include <array>
#include <string>
#include <vector>

#include "phage/types.hpp"

namespace phage {

enum class Bridge { smoothstep_quintic, linear_clamp };

std::string to_string(Bridge b);
Bridge bridge_from_string(const std::string& name);

/// Truncated identity: sigma(x) = x on [0, M], M + 1 beyond M + 1, with a
/// monotone bridge on (M, M + 1].
struct TruncationConfig {
    double M = 10.0;
    Bridge bridge = Bridge::smoothstep_quintic;
    double C_bound = 2.0;

    /// Largest slope the active bridge attains.
    double bridge_max_slope() const;

    friend bool operator==(const TruncationConfig&, const TruncationConfig&) = default;
};

struct SigmaValue {
    double value;
    double derivative;
};

/// Throws DomainError for x < 0.
SigmaValue sigma_eval(double x, const TruncationConfig& cfg);

/// Unchecked hot-path variant used by the integrators. Negative arguments
/// (which only occur on discrete overshoot) evaluate as the identity.
inline SigmaValue sigma_fast(double x, const TruncationConfig& cfg) {
    const double M = cfg.M;
    if (x <= M) {
        return {x, 1.0};
    }
    if (x > M + 1.0) {
        return {M + 1.0, 0.0};
    }
    const double t = x - M;
    if (cfg.bridge == Bridge::linear_clamp) {
        return {x, 1.0};
    }
    const double t2 = t * t;
    // p(t) = t + 4t^3 - 7t^4 + 3t^5 matches value, slope and curvature at both joins.
    const double p = t + t2 * t * (4.0 + t * (-7.0 + 3.0 * t));
    const double dp = 1.0 + t2 * (12.0 + t * (-28.0 + 15.0 * t));
    return {M + p, dp};
}

inline double sigma(double x, const TruncationConfig& cfg) { return sigma_fast(x, cfg).value; }

/// Model constants. Rates are per day; concentrations in tens of millions of units.
struct ModelParams {
    double alpha = 12.1622;  // bacteria reproduction rate
    double k = 27.36;        // adsorption rate
    double d = 0.1;          // phage inoculation rate
    double m = 0.1947;       // phage death rate
    double b = 61.0;         // burst size
    double mu = 0.5;         // bacteria death rate
    double zeta = 0.01875;   // latency delay
    TruncationConfig sigma_cfg{};

    double M() const { return sigma_cfg.M; }
    double gamma() const { return k * d / m - alpha; }
    double attenuation() const;  // e^{-mu zeta}
    double phage_equilibrium() const { return d / m; }
    State E0() const { return {0.0, d / m}; }

    /// Throws InputError when a type invariant is violated.
    void validate() const;

    /// Salmonella ATCC14028 / UAB_Phi78 scenario with M = 10, mu = 0.5.
    static ModelParams reference();

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

Vec2 drift_nondelayed(const State& z, const ModelParams& p);
Vec2 drift_delayed(const State& now, const State& lag, const ModelParams& p);
Vec2 diffusion(const State& z, double eps, const ModelParams& p);

/// Ito correction (eps^2/2) sigma sigma' per component. Adding it to the
/// drift turns the Stratonovich system into its Ito form.
Vec2 stratonovich_correction(const State& z, double eps, const ModelParams& p);

enum class Stability { stable, unstable, non_admissible };

std::string to_string(Stability s);

struct EquilibriumPoint {
    State z;
    Stability classification;
};

using Matrix2 = std::array<std::array<double, 2>, 2>;

struct EquilibriumReport {
    std::vector<EquilibriumPoint> points;
    Matrix2 jacobian_at_E0{};
    std::array<double, 2> eigenvalues{};

    std::vector<State> admissible() const;
};

/// Steady states of the (delayed) deterministic drift. E0 = (0, d/m) is
/// always first. The delayed system uses the effective burst b e^{-mu zeta}.
EquilibriumReport equilibria(const ModelParams& p, bool delayed);

/// eta = min(gamma, m/2). Throws HypothesisError when gamma <= 0.
double decay_rate_eta(const ModelParams& p);

struct ClauseResult {
    std::string clause;
    bool passed;
    double margin;  // > 0 means satisfied with room to spare
    std::string detail;
};

struct ValidationReport {
    std::string hypothesis;
    std::vector<ClauseResult> clauses;

    bool all_passed() const;
    const ClauseResult* find(const std::string& clause) const;
};

struct Region {
    Interval s_range;
    Interval q_range;

    bool contains(const State& z, double tol = 0.0) const {
        return z.S >= s_range.lo - tol && z.S <= s_range.hi + tol && z.Q >= q_range.lo - tol &&
               z.Q <= q_range.hi + tol;
    }
};

/// Non-delayed region R0 = [0, (mM-d)/(k(b-1)M)] x [d/m, M].
Region region_nondelayed(const ModelParams& p);
/// Delayed region R = [0, (mM-d)/(k b e^{-mu zeta} M)] x [d/m, M].
Region region_delayed(const ModelParams& p);

ValidationReport check_hypothesis1(const ModelParams& p, const State& init);
ValidationReport check_hypothesis2(const ModelParams& p, const HistoryTrajectory& hist);
ValidationReport check_hypothesis3(const ModelParams& p, const HistoryTrajectory& hist);

struct FirstExit {
    bool exited = false;
    double t = 0.0;
    std::size_t index = 0;
    char component = 'S';
    double value = 0.0;
};

FirstExit region_membership(const HistoryTrajectory& traj, const Region& region, double tol);

}  // namespace phage
