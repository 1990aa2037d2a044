#pragma once

#include <cmath>

#include "phage/model.hpp"

namespace phage {

/// Drift and noise coefficients with the parameter-only factors hoisted out
/// of the stepping loops.
class DriftKernel {
public:
    explicit DriftKernel(const ModelParams& p)
        : alpha_(p.alpha),
          k_(p.k),
          m_(p.m),
          q_eq_(p.d / p.m),
          k_burst_net_(p.k * (p.b - 1.0)),
          k_burst_lag_(p.k * p.b * std::exp(-p.mu * p.zeta)),
          cfg_(p.sigma_cfg) {}

    Vec2 nondelayed(const State& z) const {
        const double sq = sigma_fast(z.Q, cfg_).value;
        return {(alpha_ - k_ * sq) * z.S, m_ * (q_eq_ - z.Q) + k_burst_net_ * sq * z.S};
    }

    Vec2 delayed(const State& now, const State& lag) const {
        const double sq = sigma_fast(now.Q, cfg_).value;
        const double sq_lag = sigma_fast(lag.Q, cfg_).value;
        return {(alpha_ - k_ * sq) * now.S, m_ * (q_eq_ - now.Q) - k_ * sq * now.S + k_burst_lag_ * sq_lag * lag.S};
    }

    Vec2 diffusion(const State& z, double eps) const {
        return {eps * sigma_fast(z.S, cfg_).value, eps * sigma_fast(z.Q, cfg_).value};
    }

    Vec2 correction(const State& z, double eps) const {
        const auto s = sigma_fast(z.S, cfg_);
        const auto q = sigma_fast(z.Q, cfg_);
        const double h = 0.5 * eps * eps;
        return {h * s.value * s.derivative, h * q.value * q.derivative};
    }

private:
    double alpha_;
    double k_;
    double m_;
    double q_eq_;  // d/m, so the phage term cancels exactly at E0
    double k_burst_net_;
    double k_burst_lag_;
    TruncationConfig cfg_;
};

}  // namespace phage
