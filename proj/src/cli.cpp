#include "phage/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "phage/analysis.hpp"
#include "phage/errors.hpp"
#include "phage/report_io.hpp"

namespace phage::cli {

namespace {

bool parse_bool(const std::string& text) {
    std::string v = text;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no" || v == "off") {
        return false;
    }
    throw ConfigError(fmt::format("--delayed: '{}' is not a boolean", text), 0, "delayed");
}

std::ofstream open_output(const std::string& path) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(path);
    if (!out) {
        throw ConfigError(fmt::format("cannot write output file '{}'", path), 0, "output");
    }
    return out;
}

std::string eps_tag(double eps) { return fmt::format("{:g}", eps); }

}  // namespace

void apply_overrides(RunConfig& cfg, const Overrides& ov) {
    if (ov.eps) {
        if (!cfg.noise) {
            cfg.noise = NoiseSettings{};
        }
        cfg.noise->eps = *ov.eps;
    }
    if (ov.seed) {
        if (!cfg.noise) {
            cfg.noise = NoiseSettings{};
        }
        cfg.noise->seed = *ov.seed;
    }
    if (ov.scheme) {
        if (!cfg.noise) {
            cfg.noise = NoiseSettings{};
        }
        try {
            cfg.noise->scheme = scheme_from_string(*ov.scheme);
        } catch (const InputError& ex) {
            throw ConfigError(fmt::format("--scheme: {}", ex.what()), 0, "noise.scheme");
        }
    }
    if (ov.rho) {
        if (!(*ov.rho > 0.0)) {
            throw ConfigError("--rho must be > 0", 0, "query.rho");
        }
        cfg.query.rho = *ov.rho;
    }
    if (ov.interval) {
        const auto& v = *ov.interval;
        if (v.size() != 2 || !(v[0] < v[1])) {
            throw ConfigError("--interval needs two increasing times a,b", 0, "query.interval");
        }
        cfg.query.interval = Interval{v[0], v[1]};
        cfg.query.kappas.reset();
    }
    if (ov.kappas) {
        const auto& v = *ov.kappas;
        if (v.size() != 3) {
            throw ConfigError("--kappas needs kappa1,kappa2,c", 0, "query.kappas");
        }
        cfg.query.kappas = std::array<double, 3>{v[0], v[1], v[2]};
        if (!ov.interval) {
            cfg.query.interval.reset();
        }
    }
    if (ov.paths) {
        if (*ov.paths < 1) {
            throw ConfigError("--paths must be >= 1", 0, "query.paths");
        }
        cfg.query.paths = *ov.paths;
    }
    if (ov.threads) {
        cfg.query.threads = *ov.threads;
    }
    if (ov.dt) {
        if (!(*ov.dt > 0.0)) {
            throw ConfigError("--dt must be > 0", 0, "grid.dt");
        }
        cfg.grid.dt = *ov.dt;
    }
    if (ov.t_end) {
        if (!(*ov.t_end > 0.0)) {
            throw ConfigError("--t-end must be > 0", 0, "grid.t_end");
        }
        cfg.grid.t_end = *ov.t_end;
    }
    if (ov.delayed) {
        cfg.delayed = *ov.delayed;
    }
    if (ov.out) {
        cfg.output = *ov.out;
    }
}

int cmd_simulate(const RunConfig& cfg, bool plot, std::ostream& log) {
    const auto det = integrate_deterministic(cfg.model, cfg.init, cfg.grid, cfg.delayed);
    const bool delayed = cfg.delayed && cfg.model.zeta > 0.0;
    {
        auto out = open_output(cfg.output + "_det.csv");
        write_trajectory_csv(out, det,
                             {fmt::format("run: deterministic RK4, {} system, dt={:.17g}",
                                          delayed ? "delayed" : "non-delayed", det.dt)});
        log << "wrote " << cfg.output << "_det.csv (" << det.size() << " nodes)\n";
    }

    std::vector<std::pair<double, HistoryTrajectory>> noisy;
    if (cfg.noise) {
        for (double eps : cfg.noise->eps) {
            if (eps == 0.0) {
                continue;
            }
            NoiseConfig noise{eps, cfg.noise->seed, 0, cfg.noise->scheme, 1};
            auto traj = integrate_sde_path(cfg.model, cfg.init, noise, cfg.grid, cfg.delayed);
            const std::string path = cfg.output + "_eps" + eps_tag(eps) + ".csv";
            auto out = open_output(path);
            write_trajectory_csv(out, traj,
                                 {fmt::format("run: eps={:.17g} scheme={} seed={} path_index=0 dt={:.17g}", eps,
                                              to_string(noise.scheme), noise.seed, traj.dt)});
            log << "wrote " << path << " (" << traj.positivity.excursions.size() << " negative excursions)\n";
            noisy.emplace_back(eps, std::move(traj));
        }
    }

    if (plot) {
        static const char* palette[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
        std::vector<PlotSeries> series;
        series.push_back({"deterministic (eps = 0)", "#000000", &det});
        for (std::size_t i = 0; i < noisy.size(); ++i) {
            series.push_back({fmt::format("eps = {:g}", noisy[i].first), palette[i % 6], &noisy[i].second});
        }
        const std::string svg = render_trajectory_svg(
            series, fmt::format("Bacteria S and phage Q ({} system)", delayed ? "delayed" : "non-delayed"));
        auto out = open_output(cfg.output + ".svg");
        out << svg;
        log << "wrote " << cfg.output << ".svg\n";
    }
    return kSuccess;
}

namespace {

Interval resolve_interval(const RunConfig& cfg) {
    const auto& q = cfg.query;
    if (q.interval && q.kappas) {
        throw ConfigError("give either an interval or kappas, not both", 0, "query");
    }
    if (q.interval) {
        return *q.interval;
    }
    if (!q.kappas) {
        throw ConfigError("ensemble needs query.interval or query.kappas", 0, "query");
    }
    const auto [k1, k2, c] = *q.kappas;
    try {
        return interval_from_kappas(k1, k2, c, q.rho, decay_rate_eta(cfg.model));
    } catch (const std::exception& ex) {
        throw ConfigError(fmt::format("query.kappas: {}", ex.what()), 0, "query.kappas");
    }
}

}  // namespace

int cmd_ensemble(const RunConfig& cfg, std::ostream& log) {
    if (!cfg.noise || cfg.noise->eps.empty()) {
        throw ConfigError("ensemble needs at least one noise.eps value", 0, "noise.eps");
    }
    const Interval interval = resolve_interval(cfg);
    std::vector<ConcentrationEstimate> rows;
    for (double eps : cfg.noise->eps) {
        ConcentrationQuery q;
        q.rho = cfg.query.rho;
        q.interval = interval;
        q.n_paths = cfg.query.paths;
        q.eps = eps;
        q.grid = cfg.grid;
        q.grid.t_end = interval.hi;
        q.delayed = cfg.delayed;
        q.scheme = cfg.noise->scheme;
        try {
            q.validate();
        } catch (const InputError& ex) {
            throw ConfigError(ex.what(), 0, "query");
        }
        rows.push_back(estimate_concentration(q, cfg.model, cfg.init, cfg.noise->seed, cfg.query.threads));
        const auto& e = rows.back();
        log << fmt::format("eps={:g} rho={:g} I=[{:g},{:g}] exceed={}/{} p_hat={:.6g} ci=[{:.6g},{:.6g}] failures={}\n",
                           eps, q.rho, interval.lo, interval.hi, e.exceed_count, e.n_paths, e.p_hat, e.ci_lo,
                           e.ci_hi, e.failures);
    }

    std::vector<std::string> comments;
    comments.push_back(fmt::format("seed={} scheme={} delayed={} dt={:.17g}", cfg.noise->seed,
                                   to_string(cfg.noise->scheme), cfg.delayed ? "true" : "false", cfg.grid.dt));
    try {
        const ScalingFit fit = scaling_regression(rows);
        comments.push_back(fmt::format("scaling_fit: log p_hat = {:.17g} / eps^2 + {:.17g}; monotone_ok={}",
                                       fit.slope, fit.intercept, fit.monotone_ok ? "true" : "false"));
        for (const auto& pt : fit.points) {
            if (pt.excluded) {
                comments.push_back(
                    fmt::format("scaling_fit: eps={:g} excluded (p_hat=0), upper_ci={:.17g}", pt.eps, pt.ci_hi));
            }
        }
    } catch (const InsufficientDataError& ex) {
        comments.push_back(fmt::format("scaling_fit: skipped ({})", ex.what()));
        comments.push_back(fmt::format("monotone_ok={}", monotone_in_eps([&] {
                                                             std::vector<ScalingPoint> pts;
                                                             for (const auto& e : rows) {
                                                                 pts.push_back({std::abs(e.query.eps), e.p_hat, e.ci_lo,
                                                                                e.ci_hi, !(e.p_hat > 0.0)});
                                                             }
                                                             return pts;
                                                         }())
                                                             ? "true"
                                                             : "false"));
    }
    auto out = open_output(cfg.output + "_ensemble.csv");
    write_ensemble_csv(out, rows, comments);
    log << "wrote " << cfg.output << "_ensemble.csv\n";
    return kSuccess;
}

namespace {

HistoryTrajectory initial_history(const RunConfig& cfg) {
    HistoryTrajectory h;
    const bool delayed = cfg.delayed && cfg.model.zeta > 0.0;
    if (!delayed) {
        h.t0 = 0.0;
        h.dt = cfg.grid.dt;
        h.states.push_back(cfg.init.at(0.0, cfg.model));
        return h;
    }
    const GridConfig g = cfg.grid.aligned(cfg.model.zeta);
    const std::size_t L = g.lag_steps(cfg.model.zeta);
    h.dt = g.dt;
    h.t0 = -static_cast<double>(L) * g.dt;
    for (std::size_t i = 0; i <= L; ++i) {
        const double t = (i == L) ? 0.0 : h.t0 + static_cast<double>(i) * g.dt;
        h.states.push_back(cfg.init.at(t, cfg.model));
    }
    return h;
}

nlohmann::json to_json(const ValidationReport& rep) {
    nlohmann::json clauses = nlohmann::json::array();
    for (const auto& c : rep.clauses) {
        nlohmann::json j{{"clause", c.clause}, {"passed", c.passed}, {"detail", c.detail}};
        j["margin"] = std::isfinite(c.margin) ? nlohmann::json(c.margin) : nlohmann::json(nullptr);
        clauses.push_back(j);
    }
    return {{"hypothesis", rep.hypothesis}, {"passed", rep.all_passed()}, {"clauses", clauses}};
}

}  // namespace

int cmd_validate(const RunConfig& cfg, std::ostream& out) {
    const bool delayed = cfg.delayed && cfg.model.zeta > 0.0;
    const HistoryTrajectory hist = initial_history(cfg);
    ModelParams p2 = cfg.model;
    if (!delayed) {
        p2.zeta = 0.0;
    }
    std::vector<ValidationReport> reports;
    reports.push_back(check_hypothesis1(cfg.model, cfg.init.at(0.0, cfg.model)));
    reports.push_back(check_hypothesis2(p2, hist));
    if (delayed) {
        reports.push_back(check_hypothesis3(cfg.model, hist));
    }

    bool all = true;
    nlohmann::json doc;
    doc["system"] = delayed ? "delayed" : "non-delayed";
    doc["hypotheses"] = nlohmann::json::array();
    for (const auto& rep : reports) {
        out << rep.hypothesis << "\n";
        for (const auto& c : rep.clauses) {
            out << fmt::format("  [{}] {:<15} margin={:<14.6g} {}\n", c.passed ? "PASS" : "FAIL", c.clause, c.margin,
                               c.detail);
        }
        all = all && rep.all_passed();
        doc["hypotheses"].push_back(to_json(rep));
    }
    doc["all_passed"] = all;
    out << (all ? "all clauses pass\n" : "some clauses FAIL (simulation commands still run)\n");
    auto file = open_output(cfg.output + "_validation.json");
    file << doc.dump(2) << "\n";
    return all ? kSuccess : kValidationFailure;
}

namespace {

double* axis_field(ModelParams& p, const std::string& axis) {
    if (axis == "alpha") return &p.alpha;
    if (axis == "k") return &p.k;
    if (axis == "d") return &p.d;
    if (axis == "m") return &p.m;
    if (axis == "b") return &p.b;
    if (axis == "mu") return &p.mu;
    if (axis == "zeta") return &p.zeta;
    if (axis == "M") return &p.sigma_cfg.M;
    if (axis == "C_bound") return &p.sigma_cfg.C_bound;
    return nullptr;
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

int cmd_sweep(const RunConfig& cfg, const std::string& axis, const std::vector<double>& values, std::ostream& log) {
    ModelParams probe = cfg.model;
    if (!axis_field(probe, axis)) {
        throw ConfigError(fmt::format("unknown sweep axis '{}' (expected alpha, k, d, m, b, mu, zeta, M, C_bound)",
                                      axis),
                          0, "axis");
    }
    if (values.empty()) {
        throw ConfigError("sweep needs at least one value", 0, "values");
    }
    std::ostringstream csv;
    csv << "axis,value,E0_S,E0_Q,E0_class,interior_S,interior_Q,interior_class,lambda0,lambda1,gamma,eta\n";
    for (double v : values) {
        ModelParams p = cfg.model;
        *axis_field(p, axis) = v;
        try {
            p.validate();
        } catch (const InputError& ex) {
            throw ConfigError(fmt::format("sweep {}={}: {}", axis, v, ex.what()), 0, axis);
        }
        const auto rep = equilibria(p, cfg.delayed && p.zeta > 0.0);
        const auto& e0 = rep.points.front();
        std::string interior = ",,";
        if (rep.points.size() > 1) {
            const auto& in = rep.points[1];
            interior = fmt::format("{},{},{}", num(in.z.S), num(in.z.Q), to_string(in.classification));
        }
        const double g = p.gamma();
        const std::string eta = g > 0.0 ? num(decay_rate_eta(p)) : "";
        csv << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", axis, num(v), num(e0.z.S), num(e0.z.Q),
                           to_string(e0.classification), interior, num(rep.eigenvalues[0]), num(rep.eigenvalues[1]),
                           num(g), eta);
    }
    auto out = open_output(cfg.output + "_sweep.csv");
    out << csv.str();
    log << csv.str();
    log << "wrote " << cfg.output << "_sweep.csv\n";
    return kSuccess;
}

int cmd_equilibria(const RunConfig& cfg, std::ostream& out) {
    const bool delayed = cfg.delayed && cfg.model.zeta > 0.0;
    const auto rep = equilibria(cfg.model, delayed);
    out << fmt::format("equilibria ({} system)\n", delayed ? "delayed" : "non-delayed");
    for (const auto& pt : rep.points) {
        out << fmt::format("  ({:.17g}, {:.17g})  {}\n", pt.z.S, pt.z.Q, to_string(pt.classification));
    }
    const auto& J = rep.jacobian_at_E0;
    out << fmt::format("jacobian at E0: [[{:.17g}, {:.17g}], [{:.17g}, {:.17g}]]\n", J[0][0], J[0][1], J[1][0],
                       J[1][1]);
    out << fmt::format("eigenvalues at E0: {:.17g}, {:.17g}\n", rep.eigenvalues[0], rep.eigenvalues[1]);
    out << fmt::format("gamma = kd/m - alpha = {:.17g}\n", cfg.model.gamma());
    if (cfg.model.gamma() > 0.0) {
        out << fmt::format("eta = min(gamma, m/2) = {:.17g}\n", decay_rate_eta(cfg.model));
    } else {
        out << "eta undefined (gamma <= 0)\n";
    }
    return kSuccess;
}

int run(int argc, char** argv) {
    CLI::App app{"Bacteriophage-bacteria predator-prey simulation and analysis toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string dump_path;
    Overrides ov;
    std::string eps_text, interval_text, kappas_text, delayed_text, values_text, axis;
    bool plot = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Run configuration file")->required();
        sub->add_option("--eps", eps_text, "Noise intensity (comma-separated list allowed)");
        sub->add_option("--rho", ov.rho, "Deviation radius");
        sub->add_option("--interval", interval_text, "Observation window a,b (days)");
        sub->add_option("--kappas", kappas_text, "kappa1,kappa2,c for the window [k1 ln(c/rho)/eta, k2 ln(c/rho)/eta]");
        sub->add_option("--paths", ov.paths, "Monte Carlo path count");
        sub->add_option("--seed", ov.seed, "Master seed");
        sub->add_option("--dt", ov.dt, "Step size (days)");
        sub->add_option("--t-end", ov.t_end, "Horizon (days)");
        sub->add_option("--delayed", delayed_text, "Use the delayed system (true/false)");
        sub->add_option("--scheme", ov.scheme, "em or heun");
        sub->add_option("--out", ov.out, "Output path prefix");
        sub->add_option("--threads", ov.threads, "Worker threads (also PHAGE_SDE_THREADS)");
        sub->add_option("--dump-config", dump_path, "Write the effective configuration to this path");
    };

    auto* simulate = app.add_subcommand("simulate", "Deterministic and stochastic trajectories");
    add_common(simulate);
    simulate->add_flag("--plot", plot, "Also write an SVG figure");
    auto* ensemble = app.add_subcommand("ensemble", "Monte Carlo concentration estimate per eps");
    add_common(ensemble);
    auto* validate = app.add_subcommand("validate", "Check Hypotheses 1-3 on the configuration");
    add_common(validate);
    auto* sweep = app.add_subcommand("sweep", "Equilibria and decay rate across one parameter");
    add_common(sweep);
    sweep->add_option("--axis", axis, "Model parameter to vary")->required();
    sweep->add_option("--values", values_text, "Comma-separated values")->required();
    auto* equil = app.add_subcommand("equilibria", "Equilibria and linear stability");
    add_common(equil);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kSuccess : kConfigError;
    }

    try {
        if (!eps_text.empty()) {
            ov.eps = parse_number_list(eps_text, "--eps");
        }
        if (!interval_text.empty()) {
            ov.interval = parse_number_list(interval_text, "--interval");
        }
        if (!kappas_text.empty()) {
            ov.kappas = parse_number_list(kappas_text, "--kappas");
        }
        if (!delayed_text.empty()) {
            ov.delayed = parse_bool(delayed_text);
        }
        if (!ov.threads) {
            if (std::getenv("PHAGE_SDE_THREADS")) {
                ov.threads = default_thread_count();
            }
        }

        RunConfig cfg = load_config(config_path);
        apply_overrides(cfg, ov);
        if (!dump_path.empty()) {
            auto out = open_output(dump_path);
            out << dump_config(cfg);
        }

        if (simulate->parsed()) {
            return cmd_simulate(cfg, plot, std::cout);
        }
        if (ensemble->parsed()) {
            return cmd_ensemble(cfg, std::cout);
        }
        if (validate->parsed()) {
            return cmd_validate(cfg, std::cout);
        }
        if (sweep->parsed()) {
            return cmd_sweep(cfg, axis, parse_number_list(values_text, "--values"), std::cout);
        }
        return cmd_equilibria(cfg, std::cout);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const InputError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const HypothesisError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const IntegrationError& e) {
        std::cerr << "integration failure: " << e.what() << " (last valid t = " << e.last_valid_time() << ")\n";
        return kIntegrationFailure;
    } catch (const EstimationError& e) {
        std::cerr << "integration failure: " << e.what() << "\n";
        return kIntegrationFailure;
    }
}

}  // namespace phage::cli
