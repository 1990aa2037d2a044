// Acceptance suite: one PASS/FAIL line per criterion.
//   phage_acceptance [--only N] [--baseline PATH]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "phage/analysis.hpp"
#include "phage/integrate.hpp"
#include "phage/model.hpp"

using namespace phage;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double rel_err(double got, double want) { return want == 0.0 ? std::abs(got) : std::abs(got - want) / std::abs(want); }

std::string g_baseline_path;

// Reference scenario values, evaluated directly.
constexpr double kAlpha = 12.1622, kK = 27.36, kD = 0.1, kM = 0.1947, kB = 61.0, kZeta = 0.01875, kMu = 0.5;
constexpr double kTrunc = 10.0;

double nondelayed_bound() { return (kM * kTrunc - kD) / (kK * (kB - 1.0) * kTrunc); }
double delayed_bound() { return (kM * kTrunc - kD) / (kK * kB * std::exp(-kMu * kZeta) * kTrunc); }

Outcome closed_form() {
    const ModelParams p;
    const auto t0 = Clock::now();
    const auto rep = equilibria(p, true);
    const double eta = decay_rate_eta(p);
    const double elapsed = seconds_since(t0);

    const double q0 = kD / kM;  // below M, so sigma(q0) = q0
    const double lam0 = kAlpha - kK * q0;
    const double lam1 = -kM;
    const double gamma = kK * kD / kM - kAlpha;
    const double eta_want = std::min(gamma, kM / 2.0);

    const auto adm = rep.admissible();
    double worst = 0.0;
    worst = std::max(worst, rel_err(rep.points[0].z.Q, q0));
    worst = std::max(worst, rel_err(rep.eigenvalues[0], lam0));
    worst = std::max(worst, rel_err(rep.eigenvalues[1], lam1));
    worst = std::max(worst, rel_err(eta, eta_want));
    const bool only_e0 = adm.size() == 1 && adm[0].S == 0.0;
    const bool shown = std::abs(q0 - 0.513610) < 1e-6 && std::abs(lam0 + 1.8902) < 1e-4 && eta_want == 0.09735;
    const bool pass = only_e0 && shown && worst <= 1e-12 && elapsed < 1e-3;
    return {pass, fmt::format("E0=(0, {:.9f}) eig=({:.6f}, {:.4f}) eta={:.5f}; admissible={}; max rel err {:.2e}; "
                              "{:.3f} ms",
                              rep.points[0].z.Q, rep.eigenvalues[0], rep.eigenvalues[1], eta, adm.size(), worst,
                              elapsed * 1e3)};
}

Outcome exponential_convergence() {
    const ModelParams p;
    const auto t0 = Clock::now();
    const auto init = InitialCondition::constant(0.9 * nondelayed_bound(), 0.6);
    const auto tr = integrate_deterministic(p, init, {1e-3, 120.0, true}, false);
    const double eta = decay_rate_eta(p);
    const auto fit = fit_decay_rate(tr, p.E0(), {10.0, 120.0}, 1e-13);
    const double env = convergence_envelope(tr, p.E0(), eta, {0.0, 120.0});
    const double elapsed = seconds_since(t0);
    const bool pass = fit.rate >= eta - 0.005 && std::isfinite(env) && elapsed < 5.0;
    return {pass, fmt::format("fitted rate {:.5f} (need >= {:.5f}, {} nodes); sup |Z-E0| e^(eta t) = {:.4g}; {:.2f} s",
                              fit.rate, eta - 0.005, fit.nodes_used, env, elapsed)};
}

Outcome invariant_region() {
    const ModelParams p;
    const auto t0 = Clock::now();
    const auto init = InitialCondition::constant(0.5 * delayed_bound(), 0.6);
    const auto tr = integrate_deterministic(p, init, {1e-4, 100.0, true}, true);
    const auto exit = region_membership(tr, region_delayed(p), 1e-8);
    const double elapsed = seconds_since(t0);
    const bool pass = !exit.exited && tr.end_time() >= 100.0 - 1e-9 && elapsed < 10.0;
    return {pass, exit.exited ? fmt::format("exits at t={:.6g} ({} = {:.6g}); {:.2f} s", exit.t, exit.component,
                                            exit.value, elapsed)
                              : fmt::format("never exits over {} nodes to t={:.4f}; {:.2f} s", tr.size(),
                                            tr.end_time(), elapsed)};
}

Outcome positivity() {
    const ModelParams p;
    const auto t0 = Clock::now();
    const std::size_t n = 200;
    std::size_t clean = 0, excursions = 0, unreported = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const NoiseConfig noise{1.0, 20120101, i, Scheme::euler_maruyama_corrected, 1};
        const auto tr = integrate_sde_path(p, InitialCondition::reference(), noise, {1e-4, 1.0, true}, true);
        clean += tr.positivity.clean(1e-9);
        excursions += tr.positivity.excursions.size();
        worst = std::min({worst, tr.positivity.min_S, tr.positivity.min_Q});
        std::size_t negative = 0, listed = 0;
        for (const auto& z : tr.states) {
            negative += (z.S < 0.0) + (z.Q < 0.0);
        }
        for (const auto& e : tr.positivity.excursions) {
            listed += e.nodes;
        }
        unreported += negative - std::min(negative, listed);
    }
    const double elapsed = seconds_since(t0);
    const double frac = static_cast<double>(clean) / n;
    const bool pass = frac >= 0.99 && unreported == 0 && elapsed < 60.0;
    return {pass, fmt::format("{}/{} paths clean at -1e-9 ({:.1f}%); {} excursions reported, {} negative nodes "
                              "unreported; lowest value {:.3g}; {:.2f} s",
                              clean, n, 100.0 * frac, excursions, unreported, worst, elapsed)};
}

Outcome concentration_shape() {
    const ModelParams p;
    const auto t0 = Clock::now();
    const auto init = InitialCondition::constant(0.9 * nondelayed_bound(), 0.6);
    std::vector<ConcentrationEstimate> rows;
    std::string table;
    for (double eps : {0.05, 0.1, 0.2, 0.4}) {
        ConcentrationQuery q;
        q.rho = 0.1;
        q.interval = {20.0, 40.0};
        q.n_paths = 2000;
        q.eps = eps;
        q.grid = {1e-3, 40.0, true};
        q.delayed = false;
        rows.push_back(estimate_concentration(q, p, init, 20120101));
        table += fmt::format(" eps={}: {:.4f} [{:.4f},{:.4f}]", eps, rows.back().p_hat, rows.back().ci_lo,
                             rows.back().ci_hi);
    }
    const auto fit = scaling_regression(rows);
    const double elapsed = seconds_since(t0);
    const bool pass = fit.monotone_ok && fit.slope < 0.0 && elapsed < 600.0;
    return {pass, fmt::format("p_hat{}; monotone in |eps| up to CI overlap: {}; slope of log p vs 1/eps^2 = {:.5g}; "
                              "{:.1f} s",
                              table, fit.monotone_ok ? "yes" : "no", fit.slope, elapsed)};
}

Outcome coupled_gronwall() {
    const ModelParams p;
    const auto t0 = Clock::now();
    const auto init = InitialCondition::constant(0.9 * nondelayed_bound(), 0.6);
    const std::size_t n = 64;
    std::vector<std::pair<double, double>> ratios;
    for (double eps : {0.4, 0.2, 0.1, 0.05}) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const NoiseConfig noise{eps, 7, i, Scheme::euler_maruyama_corrected, 1};
            sum += coupled_sup_deviation(p, init, noise, {1e-3, 1.0, true}, false, 1.0);
        }
        ratios.emplace_back(eps, sum / n / eps);
    }
    const double base = ratios.back().second;
    double worst = 0.0;
    std::string table;
    for (const auto& [eps, r] : ratios) {
        worst = std::max(worst, r);
        table += fmt::format(" eps={}: {:.5f}", eps, r);
    }
    const double elapsed = seconds_since(t0);
    const bool pass = worst <= 3.0 * base && elapsed < 30.0;
    return {pass, fmt::format("mean sup|Z^eps-Z^0|/eps{}; max/value(0.05) = {:.3f} (limit 3); {:.2f} s", table,
                              worst / base, elapsed)};
}

Outcome scheme_validity() {
    const ModelParams p;
    const auto t0 = Clock::now();
    const auto init = InitialCondition::constant(0.9 * nondelayed_bound(), 0.6);
    const std::vector<double> dts{1e-3, 5e-4, 2.5e-4, 1.25e-4};
    const double eps = 0.5;
    const auto strong = strong_order_study(p, init, eps, Scheme::euler_maruyama_corrected, dts, 1e-3 / 64, 1.0, 200,
                                           11);
    const auto gap = scheme_gap_study(p, init, eps, dts, 1.0, 200, 11);
    const double elapsed = seconds_since(t0);
    std::string errs, gaps;
    for (const auto& pt : strong.points) {
        errs += fmt::format(" {:.3g}", pt.rms_error);
    }
    for (const auto& pt : gap.points) {
        gaps += fmt::format(" {:.3g}", pt.rms_error);
    }
    const bool order_ok = strong.order >= 0.5 - 0.15;
    const bool gap_ok = gap.order >= 0.9;
    const bool pass = order_ok && gap_ok && elapsed < 120.0;
    return {pass, fmt::format("EM strong order {:.3f} (need >= 0.35: {}; rms{}); EM-vs-Heun gap slope {:.3f} "
                              "(need >= 0.9: {}; rms{}); {:.1f} s",
                              strong.order, order_ok ? "ok" : "no", errs, gap.order, gap_ok ? "ok" : "no", gaps,
                              elapsed)};
}

// Brute-force scan: a cell is flagged when both drift components take
// values <= 0 and >= 0 on its corners.
struct Scan {
    std::size_t n;
    double h;
    std::vector<unsigned char> flagged;  // n x n cells
    bool at(long i, long j) const {
        return i >= 0 && j >= 0 && i < static_cast<long>(n) && j < static_cast<long>(n) && flagged[i * n + j];
    }
};

Scan scan_drift(const ModelParams& p, bool delayed, std::size_t n) {
    const double h = p.M() / static_cast<double>(n);
    const std::size_t nodes = n + 1;
    std::vector<signed char> s1(nodes * nodes), s2(nodes * nodes);
    auto sgn = [](double v) -> signed char { return v > 0 ? 1 : (v < 0 ? -1 : 0); };
    for (std::size_t i = 0; i < nodes; ++i) {
        for (std::size_t j = 0; j < nodes; ++j) {
            const State z{static_cast<double>(i) * h, static_cast<double>(j) * h};
            const Vec2 f = delayed ? drift_delayed(z, z, p) : drift_nondelayed(z, p);
            s1[i * nodes + j] = sgn(f[0]);
            s2[i * nodes + j] = sgn(f[1]);
        }
    }
    Scan scan{n, h, std::vector<unsigned char>(n * n, 0)};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            bool ok = true;
            for (const auto* s : {&s1, &s2}) {
                signed char lo = 1, hi = -1;
                for (std::size_t a : {i, i + 1}) {
                    for (std::size_t b : {j, j + 1}) {
                        lo = std::min(lo, (*s)[a * nodes + b]);
                        hi = std::max(hi, (*s)[a * nodes + b]);
                    }
                }
                ok = ok && lo <= 0 && hi >= 0;
            }
            scan.flagged[i * n + j] = ok;
        }
    }
    return scan;
}

Outcome oracle_equivalence() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(424242);
    auto unif = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    const std::size_t n = 2000;
    int failures = 0, above = 0, below = 0, interior = 0, clusters_seen = 0;
    std::string first_failure;
    for (int set = 0; set < 20; ++set) {
        ModelParams p;
        p.m = unif(0.2, 1.0);
        p.d = unif(0.05, 0.5);
        p.k = unif(0.5, 3.0);
        p.b = unif(1.5, 5.0);
        p.mu = unif(0.0, 1.0);
        p.zeta = unif(0.0, 0.05);
        const bool growth_wins = set % 2 == 1;  // alternate alpha > kd/m and alpha < kd/m
        p.alpha = p.k * p.d / p.m * (growth_wins ? unif(1.1, 3.0) : unif(0.3, 0.9));
        (p.alpha > p.k * p.d / p.m ? above : below)++;
        p.sigma_cfg.M = std::max(2.0, 1.5 * std::max(p.d / p.m, p.alpha / p.k)) + unif(0.0, 3.0);

        for (bool delayed : {false, true}) {
            const auto rep = equilibria(p, delayed);
            std::vector<State> eq;
            for (const auto& z : rep.admissible()) {
                if (z.S <= p.M() && z.Q <= p.M()) {
                    eq.push_back(z);
                    interior += z.S > 0.0;
                }
            }
            const Scan scan = scan_drift(p, delayed, n);
            auto cell_of = [&](const State& z) {
                const auto c = [&](double v) {
                    return std::min<long>(static_cast<long>(n) - 1, static_cast<long>(std::floor(v / scan.h)));
                };
                return std::pair<long, long>{c(z.S), c(z.Q)};
            };
            auto near_flag = [&](long i, long j, const std::vector<int>* label, int want) {
                for (long a = i - 1; a <= i + 1; ++a) {
                    for (long b = j - 1; b <= j + 1; ++b) {
                        if (scan.at(a, b) && (!label || (*label)[a * n + b] == want)) {
                            return true;
                        }
                    }
                }
                return false;
            };
            bool ok = true;
            std::string why;
            for (const auto& z : eq) {
                const auto [i, j] = cell_of(z);
                if (!near_flag(i, j, nullptr, 0)) {
                    ok = false;
                    why = fmt::format("equilibrium ({:.4g}, {:.4g}) not in a sign-change cell", z.S, z.Q);
                }
            }
            // connected clusters of flagged cells; each must touch an equilibrium
            std::vector<int> label(n * n, -1);
            int clusters = 0;
            for (std::size_t c = 0; c < n * n && ok; ++c) {
                if (!scan.flagged[c] || label[c] >= 0) {
                    continue;
                }
                std::deque<std::size_t> queue{c};
                label[c] = clusters;
                while (!queue.empty()) {
                    const std::size_t cur = queue.front();
                    queue.pop_front();
                    const long ci = static_cast<long>(cur / n), cj = static_cast<long>(cur % n);
                    for (long a = ci - 1; a <= ci + 1; ++a) {
                        for (long b = cj - 1; b <= cj + 1; ++b) {
                            if (scan.at(a, b) && label[a * n + b] < 0) {
                                label[a * n + b] = clusters;
                                queue.push_back(a * n + b);
                            }
                        }
                    }
                }
                bool owned = false;
                for (const auto& z : eq) {
                    const auto [i, j] = cell_of(z);
                    owned = owned || near_flag(i, j, &label, clusters);
                }
                if (!owned) {
                    ok = false;
                    why = fmt::format("orphan sign-change cluster at cell ({}, {})", c / n, c % n);
                }
                ++clusters;
            }
            clusters_seen += clusters;
            if (!ok) {
                ++failures;
                if (first_failure.empty()) {
                    first_failure = fmt::format(" first: set {} ({}): {}", set, delayed ? "delayed" : "non-delayed",
                                                why);
                }
            }
        }
    }
    const double elapsed = seconds_since(t0);
    const bool pass = failures == 0 && above > 0 && below > 0 && elapsed < 60.0;
    return {pass, fmt::format("20 parameter sets ({} with alpha > kd/m, {} below), both drifts, {}x{} grid: {} "
                              "interior equilibria, {} sign-change clusters, {} disagreements{}; {:.1f} s",
                              above, below, n, n, interior, clusters_seen, failures, first_failure, elapsed)};
}

Outcome qualitative_reference() {
    const ModelParams p;
    const auto t0 = Clock::now();
    const double horizon = 120.0;
    const auto tr = integrate_deterministic(p, InitialCondition::reference(), {1e-4, horizon, true}, true);
    std::size_t peak = 0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        if (tr.states[i].S > tr.states[peak].S) {
            peak = i;
        }
    }
    const double s_peak = tr.states[peak].S;
    double t_decay = -1.0;
    for (std::size_t i = peak; i < tr.size(); ++i) {
        if (tr.states[i].S < 1e-3 * s_peak) {
            t_decay = tr.time(i);
            break;
        }
    }
    // last node outside the band; Q stays inside after it
    const double q_eq = p.d / p.m;
    std::size_t last_out = 0;
    bool ever_out = false;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        if (std::abs(tr.states[i].Q - q_eq) > 0.05) {
            last_out = i;
            ever_out = true;
        }
    }
    const bool settles = last_out + 1 < tr.size();
    const double t_band = settles ? tr.time(ever_out ? last_out + 1 : 0) : -1.0;
    const double elapsed = seconds_since(t0);
    const bool shape = peak > 0 && t_decay > 0.0 && settles;

    std::string baseline_note = "no baseline path given";
    bool baseline_ok = true;
    if (!g_baseline_path.empty()) {
        std::ifstream in(g_baseline_path);
        double b_peak = 0, b_decay = 0, b_band = 0;
        if (in >> b_peak >> b_decay >> b_band) {
            const double tol = 2.0 * tr.dt;
            baseline_ok = std::abs(b_peak - tr.time(peak)) <= tol && std::abs(b_decay - t_decay) <= tol &&
                          std::abs(b_band - t_band) <= tol;
            baseline_note = fmt::format("baseline ({:.6f}, {:.6f}, {:.6f}) {}", b_peak, b_decay, b_band,
                                        baseline_ok ? "matched" : "MISMATCH");
        } else if (shape) {
            std::ofstream out(g_baseline_path);
            out << fmt::format("{:.17g} {:.17g} {:.17g}\n", tr.time(peak), t_decay, t_band);
            baseline_note = fmt::format("baseline recorded to {}", g_baseline_path);
        }
    }
    const bool pass = shape && baseline_ok;
    return {pass, fmt::format("S peak {:.6g} at t={:.6f}; S < 1e-3 peak from t={:.6f}; Q within 0.05 of d/m from "
                              "t={:.6f} to {}; {}; {:.2f} s",
                              s_peak, tr.time(peak), t_decay, t_band, horizon, baseline_note, elapsed)};
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--only" && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        } else if (a == "--baseline" && i + 1 < argc) {
            g_baseline_path = argv[++i];
        } else {
            std::fprintf(stderr, "usage: %s [--only N] [--baseline PATH]\n", argv[0]);
            return 2;
        }
    }
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"closed-form agreement", closed_form},
        {"exponential convergence", exponential_convergence},
        {"invariant region", invariant_region},
        {"positivity", positivity},
        {"concentration shape", concentration_shape},
        {"coupled Gronwall shape", coupled_gronwall},
        {"scheme validity", scheme_validity},
        {"oracle equivalence", oracle_equivalence},
        {"reference qualitative shape", qualitative_reference},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (only != 0 && only != static_cast<int>(i + 1)) {
            continue;
        }
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& ex) {
            o = {false, fmt::format("threw: {}", ex.what())};
        }
        failed += !o.pass;
        std::printf("[%s] %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
