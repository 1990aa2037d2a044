#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "phage/integrate.hpp"
#include "phage/model.hpp"

namespace phage {

/// Invalid or malformed configuration. Carries the offending line (0 when
/// the problem is not tied to a line) and the section.key field name.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& message, int line = 0, std::string field = {});

    int line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    int line_;
    std::string field_;
};

struct NoiseSettings {
    std::vector<double> eps;
    std::uint64_t seed = 20120101;
    Scheme scheme = Scheme::euler_maruyama_corrected;

    friend bool operator==(const NoiseSettings&, const NoiseSettings&) = default;
};

struct QuerySettings {
    double rho = 0.1;
    std::optional<Interval> interval;
    std::optional<std::array<double, 3>> kappas;  // kappa1, kappa2, c
    std::size_t paths = 1000;
    unsigned threads = 0;  // 0: PHAGE_SDE_THREADS or hardware concurrency

    friend bool operator==(const QuerySettings&, const QuerySettings&) = default;
};

/// Everything one command needs. Sections of the config file:
/// [model], [init], [grid], [noise], [query]; `delayed` and `output` sit
/// above the first section.
struct RunConfig {
    ModelParams model;
    InitialCondition init = InitialCondition::reference();
    GridConfig grid{1e-4, 120.0, true};
    std::optional<NoiseSettings> noise;
    bool delayed = true;
    std::string output = "phage";
    QuerySettings query;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// All [model] keys are required; everything else has a default.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

/// Writes a config that parse_config reads back to an identical RunConfig.
std::string dump_config(const RunConfig& cfg);

/// Parses "a,b,c" into doubles; throws ConfigError naming `field`.
std::vector<double> parse_number_list(const std::string& text, const std::string& field, int line = 0);

}  // namespace phage
