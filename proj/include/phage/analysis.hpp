#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "phage/integrate.hpp"
#include "phage/model.hpp"
#include "phage/types.hpp"

namespace phage {

/// Largest Euclidean distance to `ref` over grid nodes with t in `interval`.
/// Throws InputError when no node falls in the interval.
double sup_deviation(const HistoryTrajectory& traj, const Interval& interval, const State& ref);

/// One exceedance experiment: P(sup_I |Z - E0| >= 2 rho).
struct ConcentrationQuery {
    double rho = 0.1;
    Interval interval{20.0, 40.0};
    std::size_t n_paths = 1000;
    double eps = 0.1;
    GridConfig grid{1e-3, 40.0, true};
    bool delayed = false;
    Scheme scheme = Scheme::euler_maruyama_corrected;

    void validate() const;
};

struct ConcentrationEstimate {
    std::size_t exceed_count = 0;
    double p_hat = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 1.0;
    std::size_t n_paths = 0;   // completed paths
    std::size_t failures = 0;  // paths lost to integration failure
    double confidence = 0.95;
    ConcentrationQuery query;
};

/// Worker count from PHAGE_SDE_THREADS, else hardware concurrency.
unsigned default_thread_count();

/// Runs paths 0..n_paths-1 of the (seed, path_index) family. Results do not
/// depend on `threads` or scheduling. Throws EstimationError when fewer than
/// 90% of paths complete.
ConcentrationEstimate estimate_concentration(const ConcentrationQuery& q, const ModelParams& p,
                                             const InitialCondition& init, std::uint64_t seed,
                                             unsigned threads = 0);

/// [kappa1 ln(c/rho)/eta, kappa2 ln(c/rho)/eta]; needs 1 < kappa1 < kappa2 and rho < c.
Interval interval_from_kappas(double kappa1, double kappa2, double c, double rho, double eta);

struct DecayFit {
    double rate = 0.0;
    double residual_rms = 0.0;
    std::size_t nodes_used = 0;
};

/// Least-squares slope of -log|Z_t - ref| against t over nodes in `window`
/// whose deviation exceeds `floor`. Needs at least 10 such nodes.
DecayFit fit_decay_rate(const HistoryTrajectory& traj, const State& ref, const Interval& window, double floor);

/// sup over nodes in `window` of |Z_t - ref| e^{eta t}.
double convergence_envelope(const HistoryTrajectory& traj, const State& ref, double eta, const Interval& window);

struct ScalingPoint {
    double eps = 0.0;
    double p_hat = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    bool excluded = false;  // p_hat == 0: kept for its upper bound only
};

struct ScalingFit {
    std::vector<ScalingPoint> points;
    double slope = 0.0;
    double intercept = 0.0;
    bool monotone_ok = false;
};

/// OLS of log p_hat against 1/eps^2 over the positive estimates (|eps| is used).
ScalingFit scaling_regression(const std::vector<ConcentrationEstimate>& estimates);

/// True when p_hat does not decrease as |eps| grows, allowing CI overlap.
bool monotone_in_eps(std::vector<ScalingPoint> points);

/// Wilson score interval.
std::pair<double, double> wilson_ci(std::size_t successes, std::size_t trials, double confidence = 0.95);

/// Ordinary least squares y = slope x + intercept.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};
LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y);

/// sup_{[0, tau]} |Z^eps - Z^0| with both paths driven by the same increments.
double coupled_sup_deviation(const ModelParams& p, const InitialCondition& init, const NoiseConfig& noise,
                             const GridConfig& grid, bool delayed, double tau);

/// Pathwise refinement study. Each coarse dt in `dts` must be dt_ref times a
/// power of two; all runs share one Brownian path per path index.
struct RefinementPoint {
    double dt = 0.0;
    double rms_error = 0.0;
};

struct RefinementStudy {
    std::vector<RefinementPoint> points;
    double order = 0.0;  // log2-log2 regression slope
};

RefinementStudy strong_order_study(const ModelParams& p, const InitialCondition& init, double eps, Scheme scheme,
                                   const std::vector<double>& dts, double dt_ref, double t_end,
                                   std::size_t n_paths, std::uint64_t seed, bool delayed = false);

/// RMS terminal gap between the two schemes on matched increments, per dt.
RefinementStudy scheme_gap_study(const ModelParams& p, const InitialCondition& init, double eps,
                                 const std::vector<double>& dts, double t_end, std::size_t n_paths,
                                 std::uint64_t seed, bool delayed = false);

}  // namespace phage
