#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "phage/config.hpp"

namespace phage::cli {

enum ExitCode : int {
    kSuccess = 0,
    kValidationFailure = 1,
    kConfigError = 2,
    kIntegrationFailure = 3,
};

/// Flag values that override config keys.
struct Overrides {
    std::optional<std::vector<double>> eps;
    std::optional<double> rho;
    std::optional<std::vector<double>> interval;
    std::optional<std::vector<double>> kappas;
    std::optional<std::size_t> paths;
    std::optional<std::uint64_t> seed;
    std::optional<double> dt;
    std::optional<double> t_end;
    std::optional<bool> delayed;
    std::optional<std::string> scheme;
    std::optional<std::string> out;
    std::optional<unsigned> threads;
};

/// Throws ConfigError on inconsistent values.
void apply_overrides(RunConfig& cfg, const Overrides& ov);

/// Deterministic RK4 run plus one stochastic path per nonzero eps; writes
/// <out>_det.csv, <out>_eps<value>.csv and, with plot, <out>.svg.
int cmd_simulate(const RunConfig& cfg, bool plot, std::ostream& log);

/// One summary row per eps in <out>_ensemble.csv.
int cmd_ensemble(const RunConfig& cfg, std::ostream& log);

/// Hypotheses 1 and 2 (and 3 for delayed runs); text on `out`, JSON in
/// <out>_validation.json. Returns 1 when any clause fails.
int cmd_validate(const RunConfig& cfg, std::ostream& out);

/// Equilibria, eigenvalues, gamma and eta per value of `axis`.
int cmd_sweep(const RunConfig& cfg, const std::string& axis, const std::vector<double>& values, std::ostream& log);

int cmd_equilibria(const RunConfig& cfg, std::ostream& out);

/// Entry point for the phage_sde executable.
int run(int argc, char** argv);

}  // namespace phage::cli
