#include "phage/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <string>
#include <thread>

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "phage/errors.hpp"
#include "phage/sde_engine.hpp"

namespace phage {

namespace {

constexpr double kTimeSlack = 1e-9;

// Runs body(i) for i in [0, n) on up to `threads` workers. Each index is
// processed exactly once; callers write into pre-sized per-index slots.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) {
                    return;
                }
                try {
                    body(i);
                } catch (...) {
                    const std::lock_guard lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                    next.store(n);
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

}  // namespace

double sup_deviation(const HistoryTrajectory& traj, const Interval& interval, const State& ref) {
    double sup = -1.0;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const double t = traj.time(i);
        if (t >= interval.lo - kTimeSlack && t <= interval.hi + kTimeSlack) {
            sup = std::max(sup, distance(traj.states[i], ref));
        }
    }
    if (sup < 0.0) {
        throw InputError(fmt::format("no grid node of [{}, {}] lies in [{}, {}]", traj.t0, traj.end_time(),
                                     interval.lo, interval.hi));
    }
    return sup;
}

void ConcentrationQuery::validate() const {
    if (!(rho > 0.0)) {
        throw InputError("query: rho must be > 0");
    }
    if (n_paths < 1) {
        throw InputError("query: n_paths must be >= 1");
    }
    if (!(interval.lo > 0.0 && interval.lo < interval.hi && interval.hi <= grid.t_end + kTimeSlack)) {
        throw InputError(fmt::format("query: need 0 < t_a < t_b <= t_end, got [{}, {}] with t_end {}", interval.lo,
                                     interval.hi, grid.t_end));
    }
    if (!std::isfinite(eps)) {
        throw InputError("query: eps must be finite");
    }
}

unsigned default_thread_count() {
    if (const char* env = std::getenv("PHAGE_SDE_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) {
                return static_cast<unsigned>(v);
            }
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

ConcentrationEstimate estimate_concentration(const ConcentrationQuery& q, const ModelParams& p,
                                             const InitialCondition& init, std::uint64_t seed, unsigned threads) {
    q.validate();
    GridConfig grid = q.grid;
    grid.t_end = q.interval.hi;
    const detail::GridPlan plan = detail::plan_grid(p, grid, q.delayed);
    const State e0 = p.E0();
    const double threshold = 2.0 * q.rho;
    const double ta = q.interval.lo - kTimeSlack;
    const double tb = q.interval.hi + kTimeSlack;

    enum : unsigned char { kInside = 0, kExceeded = 1, kFailed = 2 };
    std::vector<unsigned char> outcome(q.n_paths, kInside);

    parallel_for(q.n_paths, threads == 0 ? default_thread_count() : threads, [&](std::size_t path) {
        NoiseConfig noise;
        noise.eps = q.eps;
        noise.seed = seed;
        noise.path_index = path;
        noise.scheme = q.scheme;
        bool exceeded = false;
        try {
            detail::run_sde(p, init, noise, plan, [&](std::size_t, double t, const State& z) {
                if (t > tb) {
                    return false;
                }
                if (t >= ta && distance(z, e0) >= threshold) {
                    exceeded = true;
                    return false;
                }
                return true;
            });
            outcome[path] = exceeded ? kExceeded : kInside;
        } catch (const IntegrationError&) {
            outcome[path] = kFailed;
        }
    });

    ConcentrationEstimate est;
    est.query = q;
    for (auto o : outcome) {
        est.exceed_count += (o == kExceeded);
        est.failures += (o == kFailed);
    }
    est.n_paths = q.n_paths - est.failures;
    if (static_cast<double>(est.n_paths) < 0.9 * static_cast<double>(q.n_paths)) {
        throw EstimationError(
            fmt::format("{} of {} paths failed to integrate (need >= 90% complete)", est.failures, q.n_paths));
    }
    est.p_hat = static_cast<double>(est.exceed_count) / static_cast<double>(est.n_paths);
    std::tie(est.ci_lo, est.ci_hi) = wilson_ci(est.exceed_count, est.n_paths, est.confidence);
    return est;
}

Interval interval_from_kappas(double kappa1, double kappa2, double c, double rho, double eta) {
    if (!(1.0 < kappa1 && kappa1 < kappa2)) {
        throw InputError(fmt::format("need 1 < kappa1 < kappa2, got {}, {}", kappa1, kappa2));
    }
    if (!(rho > 0.0) || !(rho < c)) {
        throw InputError(fmt::format("need 0 < rho < c, got rho = {}, c = {}", rho, c));
    }
    if (!(eta > 0.0)) {
        throw InputError("eta must be > 0");
    }
    const double scale = std::log(c / rho) / eta;
    return {kappa1 * scale, kappa2 * scale};
}

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) {
        throw InsufficientDataError("least squares needs at least two (x, y) pairs");
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) {
        throw InsufficientDataError("least squares: all abscissae coincide");
    }
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

DecayFit fit_decay_rate(const HistoryTrajectory& traj, const State& ref, const Interval& window, double floor) {
    if (!(window.lo < window.hi)) {
        throw InputError("fit_decay_rate: empty window");
    }
    if (!(floor > 0.0)) {
        throw InputError("fit_decay_rate: floor must be > 0");
    }
    std::vector<double> ts, ys;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const double t = traj.time(i);
        if (t < window.lo - kTimeSlack || t > window.hi + kTimeSlack) {
            continue;
        }
        const double dev = distance(traj.states[i], ref);
        if (dev > floor) {
            ts.push_back(t);
            ys.push_back(-std::log(dev));
        }
    }
    if (ts.size() < 10) {
        throw InsufficientDataError(fmt::format("fit_decay_rate: {} usable nodes, need 10", ts.size()));
    }
    const LineFit fit = least_squares(ts, ys);
    double ss = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double r = ys[i] - (fit.slope * ts[i] + fit.intercept);
        ss += r * r;
    }
    return {fit.slope, std::sqrt(ss / static_cast<double>(ts.size())), ts.size()};
}

double convergence_envelope(const HistoryTrajectory& traj, const State& ref, double eta, const Interval& window) {
    double sup = 0.0;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const double t = traj.time(i);
        if (t >= window.lo - kTimeSlack && t <= window.hi + kTimeSlack) {
            sup = std::max(sup, distance(traj.states[i], ref) * std::exp(eta * t));
        }
    }
    return sup;
}

std::pair<double, double> wilson_ci(std::size_t successes, std::size_t trials, double confidence) {
    if (trials < 1 || successes > trials) {
        throw InputError(fmt::format("wilson_ci: need 0 <= successes <= trials, trials >= 1 (got {}/{})", successes,
                                     trials));
    }
    if (!(confidence > 0.0 && confidence < 1.0)) {
        throw InputError("wilson_ci: confidence must lie in (0, 1)");
    }
    const boost::math::normal_distribution<double> normal;
    const double z = boost::math::quantile(normal, 0.5 + 0.5 * confidence);
    const double n = static_cast<double>(trials);
    const double phat = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (phat + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom;
    double lo = successes == 0 ? 0.0 : std::max(0.0, center - half);
    double hi = successes == trials ? 1.0 : std::min(1.0, center + half);
    return {std::min(lo, phat), std::max(hi, phat)};
}

bool monotone_in_eps(std::vector<ScalingPoint> points) {
    std::sort(points.begin(), points.end(), [](const auto& a, const auto& b) { return std::abs(a.eps) < std::abs(b.eps); });
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            const auto& small = points[i];
            const auto& large = points[j];
            if (small.p_hat > large.p_hat && small.ci_lo > large.ci_hi) {
                return false;
            }
        }
    }
    return true;
}

ScalingFit scaling_regression(const std::vector<ConcentrationEstimate>& estimates) {
    ScalingFit fit;
    if (estimates.empty()) {
        throw InsufficientDataError("scaling_regression: no estimates");
    }
    const auto& first = estimates.front().query;
    std::vector<double> xs, ys;
    for (const auto& e : estimates) {
        if (e.query.rho != first.rho || !(e.query.interval == first.interval)) {
            throw InputError("scaling_regression: estimates must share rho and interval");
        }
        ScalingPoint pt{std::abs(e.query.eps), e.p_hat, e.ci_lo, e.ci_hi, !(e.p_hat > 0.0)};
        fit.points.push_back(pt);
        if (!pt.excluded && pt.eps > 0.0) {
            xs.push_back(1.0 / (pt.eps * pt.eps));
            ys.push_back(std::log(pt.p_hat));
        }
    }
    if (xs.size() < 3) {
        throw InsufficientDataError(
            fmt::format("scaling_regression: {} estimates with p_hat > 0, need 3", xs.size()));
    }
    const LineFit line = least_squares(xs, ys);
    fit.slope = line.slope;
    fit.intercept = line.intercept;
    fit.monotone_ok = monotone_in_eps(fit.points);
    return fit;
}

double coupled_sup_deviation(const ModelParams& p, const InitialCondition& init, const NoiseConfig& noise,
                             const GridConfig& grid, bool delayed, double tau) {
    GridConfig g = grid;
    g.t_end = tau;
    NoiseConfig quiet = noise;
    quiet.eps = 0.0;
    const auto noisy_path = integrate_sde_path(p, init, noise, g, delayed);
    const auto base_path = integrate_sde_path(p, init, quiet, g, delayed);
    double sup = 0.0;
    for (std::size_t i = 0; i < noisy_path.size(); ++i) {
        if (noisy_path.time(i) >= -kTimeSlack && noisy_path.time(i) <= tau + kTimeSlack) {
            sup = std::max(sup, distance(noisy_path.states[i], base_path.states[i]));
        }
    }
    return sup;
}

namespace {

State terminal_state(const ModelParams& p, const InitialCondition& init, const NoiseConfig& noise,
                     const detail::GridPlan& plan) {
    State last;
    detail::run_sde(p, init, noise, plan, [&](std::size_t, double, const State& z) {
        last = z;
        return true;
    });
    return last;
}

detail::GridPlan exact_plan(const ModelParams& p, double dt, double t_end, bool delayed) {
    GridConfig g{dt, t_end, false};
    auto plan = detail::plan_grid(p, g, delayed);
    if (std::abs(static_cast<double>(plan.n_steps) * dt - t_end) > 1e-9 * t_end) {
        throw InputError(fmt::format("t_end = {} is not a multiple of dt = {}", t_end, dt));
    }
    return plan;
}

double log2_order(const std::vector<RefinementPoint>& pts) {
    std::vector<double> x, y;
    for (const auto& pt : pts) {
        x.push_back(std::log2(pt.dt));
        y.push_back(std::log2(pt.rms_error));
    }
    return least_squares(x, y).slope;
}

}  // namespace

RefinementStudy strong_order_study(const ModelParams& p, const InitialCondition& init, double eps, Scheme scheme,
                                   const std::vector<double>& dts, double dt_ref, double t_end, std::size_t n_paths,
                                   std::uint64_t seed, bool delayed) {
    if (dts.size() < 2 || n_paths < 1) {
        throw InputError("strong_order_study needs >= 2 step sizes and >= 1 path");
    }
    std::vector<std::uint32_t> factors;
    for (double dt : dts) {
        const double r = dt / dt_ref;
        const double k = std::round(r);
        if (k < 1.0 || std::abs(r - k) > 1e-9 * r) {
            throw InputError(fmt::format("dt = {} is not an integer multiple of dt_ref = {}", dt, dt_ref));
        }
        factors.push_back(static_cast<std::uint32_t>(k));
    }
    const auto ref_plan = exact_plan(p, dt_ref, t_end, delayed);
    std::vector<detail::GridPlan> plans;
    for (double dt : dts) {
        plans.push_back(exact_plan(p, dt, t_end, delayed));
    }

    std::vector<std::vector<double>> sq_err(dts.size(), std::vector<double>(n_paths, 0.0));
    parallel_for(n_paths, default_thread_count(), [&](std::size_t path) {
        NoiseConfig noise{eps, seed, path, scheme, 1};
        const State ref = terminal_state(p, init, noise, ref_plan);
        for (std::size_t l = 0; l < dts.size(); ++l) {
            noise.substeps = factors[l];
            const State z = terminal_state(p, init, noise, plans[l]);
            const double e = distance(z, ref);
            sq_err[l][path] = e * e;
        }
    });

    RefinementStudy study;
    for (std::size_t l = 0; l < dts.size(); ++l) {
        double sum = 0.0;
        for (double v : sq_err[l]) {
            sum += v;
        }
        study.points.push_back({dts[l], std::sqrt(sum / static_cast<double>(n_paths))});
    }
    study.order = log2_order(study.points);
    return study;
}

RefinementStudy scheme_gap_study(const ModelParams& p, const InitialCondition& init, double eps,
                                 const std::vector<double>& dts, double t_end, std::size_t n_paths,
                                 std::uint64_t seed, bool delayed) {
    if (dts.size() < 2 || n_paths < 1) {
        throw InputError("scheme_gap_study needs >= 2 step sizes and >= 1 path");
    }
    std::vector<detail::GridPlan> plans;
    for (double dt : dts) {
        plans.push_back(exact_plan(p, dt, t_end, delayed));
    }
    std::vector<std::vector<double>> sq_gap(dts.size(), std::vector<double>(n_paths, 0.0));
    parallel_for(n_paths, default_thread_count(), [&](std::size_t path) {
        for (std::size_t l = 0; l < dts.size(); ++l) {
            NoiseConfig em{eps, seed, path, Scheme::euler_maruyama_corrected, 1};
            NoiseConfig heun = em;
            heun.scheme = Scheme::heun_stratonovich;
            const double g = distance(terminal_state(p, init, em, plans[l]), terminal_state(p, init, heun, plans[l]));
            sq_gap[l][path] = g * g;
        }
    });
    RefinementStudy study;
    for (std::size_t l = 0; l < dts.size(); ++l) {
        double sum = 0.0;
        for (double v : sq_gap[l]) {
            sum += v;
        }
        study.points.push_back({dts[l], std::sqrt(sum / static_cast<double>(n_paths))});
    }
    study.order = log2_order(study.points);
    return study;
}

}  // namespace phage
