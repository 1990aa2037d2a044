#include "phage/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "phage/errors.hpp"
#include "phage/kernel.hpp"

namespace phage {

std::string to_string(Bridge b) {
    return b == Bridge::smoothstep_quintic ? "smoothstep_quintic" : "linear_clamp";
}

Bridge bridge_from_string(const std::string& name) {
    if (name == "smoothstep_quintic" || name == "quintic") {
        return Bridge::smoothstep_quintic;
    }
    if (name == "linear_clamp" || name == "linear") {
        return Bridge::linear_clamp;
    }
    throw InputError("unknown sigma bridge '" + name + "'");
}

std::string to_string(Stability s) {
    switch (s) {
        case Stability::stable:
            return "stable";
        case Stability::unstable:
            return "unstable";
        case Stability::non_admissible:
            return "non_admissible";
    }
    return "?";
}

double TruncationConfig::bridge_max_slope() const {
    if (bridge == Bridge::linear_clamp) {
        return 1.0;
    }
    // p'(t) = 1 + 12t^2 - 28t^3 + 15t^4 peaks at t = 2/5.
    const double t = 0.4;
    return 1.0 + t * t * (12.0 + t * (-28.0 + 15.0 * t));
}

SigmaValue sigma_eval(double x, const TruncationConfig& cfg) {
    if (!(x >= 0.0)) {
        throw DomainError(fmt::format("sigma is defined on [0, inf), got x = {}", x));
    }
    return sigma_fast(x, cfg);
}

double ModelParams::attenuation() const { return std::exp(-mu * zeta); }

void ModelParams::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw InputError(what);
        }
    };
    require(alpha > 0.0 && std::isfinite(alpha), "alpha must be finite and > 0");
    require(k > 0.0 && std::isfinite(k), "k must be finite and > 0");
    require(d > 0.0 && std::isfinite(d), "d must be finite and > 0");
    require(m > 0.0 && std::isfinite(m), "m must be finite and > 0");
    require(b > 1.0 && std::isfinite(b), "b must be finite and > 1");
    require(mu >= 0.0 && std::isfinite(mu), "mu must be finite and >= 0");
    require(zeta >= 0.0 && std::isfinite(zeta), "zeta must be finite and >= 0");
    require(sigma_cfg.M > 0.0 && std::isfinite(sigma_cfg.M), "M must be finite and > 0");
    require(sigma_cfg.C_bound > 1.0, "C_bound must be > 1");
    require(std::isfinite(gamma()), "gamma = kd/m - alpha must be finite");
}

ModelParams ModelParams::reference() { return ModelParams{}; }

Vec2 drift_nondelayed(const State& z, const ModelParams& p) { return DriftKernel(p).nondelayed(z); }

Vec2 drift_delayed(const State& now, const State& lag, const ModelParams& p) {
    return DriftKernel(p).delayed(now, lag);
}

Vec2 diffusion(const State& z, double eps, const ModelParams& p) { return DriftKernel(p).diffusion(z, eps); }

Vec2 stratonovich_correction(const State& z, double eps, const ModelParams& p) {
    return DriftKernel(p).correction(z, eps);
}

std::vector<State> EquilibriumReport::admissible() const {
    std::vector<State> out;
    for (const auto& pt : points) {
        if (pt.classification != Stability::non_admissible) {
            out.push_back(pt.z);
        }
    }
    return out;
}

namespace {

// Solve sigma(q) = level for q on the bridge (M, M+1); sigma is increasing there.
double invert_bridge(double level, const TruncationConfig& cfg) {
    double lo = cfg.M;
    double hi = cfg.M + 1.0;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) {
            break;
        }
        if (sigma_fast(mid, cfg).value < level) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

Stability classify_interior(const State& z, double b_eff, const ModelParams& p) {
    if (!(z.S > 0.0)) {
        return Stability::non_admissible;
    }
    const auto sq = sigma_fast(z.Q, p.sigma_cfg);
    // Jacobian [[0, -k s' S], [k(b_eff-1) s, -m + k(b_eff-1) s' S]]
    const double a12 = -p.k * sq.derivative * z.S;
    const double a21 = p.k * (b_eff - 1.0) * sq.value;
    const double a22 = -p.m + p.k * (b_eff - 1.0) * sq.derivative * z.S;
    const double trace = a22;
    const double det = -a12 * a21;
    return (trace < 0.0 && det > 0.0) ? Stability::stable : Stability::unstable;
}

}  // namespace

EquilibriumReport equilibria(const ModelParams& p, bool delayed) {
    p.validate();
    const double b_eff = delayed ? p.b * p.attenuation() : p.b;
    const double q0 = p.d / p.m;
    const double sq0 = sigma_fast(q0, p.sigma_cfg).value;

    EquilibriumReport rep;
    rep.jacobian_at_E0 = {{{p.alpha - p.k * sq0, 0.0}, {p.k * (b_eff - 1.0) * sq0, -p.m}}};
    rep.eigenvalues = {p.alpha - p.k * sq0, -p.m};

    const bool e0_stable = p.k * p.d / p.m > p.alpha && p.M() > q0;
    rep.points.push_back({State{0.0, q0}, e0_stable ? Stability::stable : Stability::unstable});

    // Interior: sigma(Q^) = alpha/k, then S^ = (m Q^ - d) / ((b_eff - 1) alpha).
    const double level = p.alpha / p.k;
    const TruncationConfig& cfg = p.sigma_cfg;
    double q_hat = std::numeric_limits<double>::quiet_NaN();
    if (level <= cfg.M) {
        q_hat = level;
    } else if (level < cfg.M + 1.0) {
        q_hat = cfg.bridge == Bridge::linear_clamp ? level : invert_bridge(level, cfg);
    }
    if (std::isfinite(q_hat) && b_eff != 1.0) {
        const State z{(p.m * q_hat - p.d) / ((b_eff - 1.0) * p.alpha), q_hat};
        rep.points.push_back({z, classify_interior(z, b_eff, p)});
    }
    return rep;
}

double decay_rate_eta(const ModelParams& p) {
    const double g = p.gamma();
    if (!(g > 0.0)) {
        throw HypothesisError(fmt::format("decay rate needs gamma = kd/m - alpha > 0, got {}", g));
    }
    return std::min(g, 0.5 * p.m);
}

bool ValidationReport::all_passed() const {
    return std::all_of(clauses.begin(), clauses.end(), [](const auto& c) { return c.passed; });
}

const ClauseResult* ValidationReport::find(const std::string& clause) const {
    for (const auto& c : clauses) {
        if (c.clause == clause) {
            return &c;
        }
    }
    return nullptr;
}

Region region_nondelayed(const ModelParams& p) {
    const double M = p.M();
    return {{0.0, (p.m * M - p.d) / (p.k * (p.b - 1.0) * M)}, {p.d / p.m, M}};
}

Region region_delayed(const ModelParams& p) {
    const double M = p.M();
    return {{0.0, (p.m * M - p.d) / (p.k * p.b * p.attenuation() * M)}, {p.d / p.m, M}};
}

namespace {

double box_margin(const State& z, const Region& r) {
    return std::min({z.S - r.s_range.lo, r.s_range.hi - z.S, z.Q - r.q_range.lo, r.q_range.hi - z.Q});
}

}  // namespace

ValidationReport check_hypothesis1(const ModelParams& p, const State& init) {
    ValidationReport rep{"Hypothesis 1", {}};
    const Region r0 = region_nondelayed(p);
    const double m_region = box_margin(init, r0);
    rep.clauses.push_back({"H1(i)", m_region >= 0.0, m_region,
                           fmt::format("init ({:.6g}, {:.6g}) in [0, {:.6g}] x [{:.6g}, {:.6g}]", init.S,
                                       init.Q, r0.s_range.hi, r0.q_range.lo, r0.q_range.hi)});
    const double g = p.gamma();
    rep.clauses.push_back(
        {"H1(ii).gamma", g > 0.0, g, fmt::format("gamma = kd/m - alpha = {:.6g} must be > 0", g)});
    const double mm = p.M() - p.d / p.m;
    rep.clauses.push_back({"H1(ii).M", mm > 0.0, mm,
                           fmt::format("M - d/m = {:.6g} must be > 0", mm)});
    return rep;
}

namespace {

// Nodes of the initial segment [-zeta, 0].
std::vector<State> initial_segment(const HistoryTrajectory& hist, double zeta) {
    if (hist.empty()) {
        throw InputError("empty history");
    }
    const double tol = 1e-9 * std::max(1.0, hist.dt);
    if (hist.t0 > -zeta + tol || hist.end_time() < -tol) {
        throw InputError(fmt::format("history [{}, {}] does not cover [-zeta, 0] = [{}, 0]", hist.t0,
                                     hist.end_time(), -zeta));
    }
    std::vector<State> seg;
    for (std::size_t i = 0; i < hist.size(); ++i) {
        const double t = hist.time(i);
        if (t >= -zeta - tol && t <= tol) {
            seg.push_back(hist.states[i]);
        }
    }
    return seg;
}

}  // namespace

ValidationReport check_hypothesis2(const ModelParams& p, const HistoryTrajectory& hist) {
    ValidationReport rep{"Hypothesis 2", {}};
    const auto& cfg = p.sigma_cfg;
    const double slope_margin = std::min(cfg.C_bound - 1.0, cfg.C_bound - cfg.bridge_max_slope());
    const bool sigma_ok = cfg.M > 0.0 && cfg.C_bound > 1.0 && cfg.bridge_max_slope() <= cfg.C_bound;
    rep.clauses.push_back({"H2(i)", sigma_ok, slope_margin,
                           fmt::format("{} bridge, max slope {:.6g}, C = {:.6g} > 1", to_string(cfg.bridge),
                                       cfg.bridge_max_slope(), cfg.C_bound)});
    const auto seg = initial_segment(hist, p.zeta);
    double lowest = std::numeric_limits<double>::infinity();
    for (const auto& z : seg) {
        lowest = std::min({lowest, z.S, z.Q});
    }
    rep.clauses.push_back({"H2(ii)", lowest >= 0.0, lowest,
                           fmt::format("initial history minimum component {:.6g} must be >= 0", lowest)});
    return rep;
}

ValidationReport check_hypothesis3(const ModelParams& p, const HistoryTrajectory& hist) {
    ValidationReport rep{"Hypothesis 3", {}};
    const auto seg = initial_segment(hist, p.zeta);
    const double M = p.M();
    const double q_low = p.d / p.m;
    const double burst = p.b * p.attenuation();
    const State z00 = seg.back();

    double m_box = std::numeric_limits<double>::infinity();
    double m_prod = std::numeric_limits<double>::infinity();
    double m_bound = std::numeric_limits<double>::infinity();
    const double s_bound = (p.m * M - p.d) / (p.k * burst * M);
    for (const auto& z : seg) {
        m_box = std::min({m_box, z.S, M - z.S, z.Q - q_low, M - z.Q});
        m_prod = std::min(m_prod, burst * z.Q * z.S - q_low * z00.S);
        m_bound = std::min(m_bound, s_bound - z.S);
    }
    rep.clauses.push_back({"H3(i)", m_box >= 0.0, m_box,
                           fmt::format("history in [0, {:.6g}] x [{:.6g}, {:.6g}]", M, q_low, M)});
    rep.clauses.push_back({"H3(ii).product", m_prod > 0.0, m_prod,
                           fmt::format("b e^(-mu zeta) Q S - (d/m) S(0): worst {:.6g}, must be > 0", m_prod)});
    rep.clauses.push_back({"H3(ii).burst", burst > 1.0, burst - 1.0,
                           fmt::format("b e^(-mu zeta) = {:.6g} must be > 1", burst)});
    rep.clauses.push_back({"H3(iii)", m_bound > 0.0, m_bound,
                           fmt::format("S below (mM-d)/(k b e^(-mu zeta) M) = {:.6g}", s_bound)});
    return rep;
}

FirstExit region_membership(const HistoryTrajectory& traj, const Region& region, double tol) {
    if (!(tol >= 0.0)) {
        throw InputError("region_membership: tol must be >= 0");
    }
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const State& z = traj.states[i];
        const bool s_ok = z.S >= region.s_range.lo - tol && z.S <= region.s_range.hi + tol;
        const bool q_ok = z.Q >= region.q_range.lo - tol && z.Q <= region.q_range.hi + tol;
        if (!s_ok || !q_ok) {
            return {true, traj.time(i), i, s_ok ? 'Q' : 'S', s_ok ? z.Q : z.S};
        }
    }
    return {};
}

}  // namespace phage
