#pragma once

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fluxlim/diagnostics.hpp"
#include "fluxlim/jko.hpp"
#include "fluxlim/solver.hpp"

namespace fluxlim {

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& message, int line, int column)
        : std::runtime_error(message), line_(line), column_(column)
    {
    }
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

struct ConfigEntry {
    std::string key;
    std::string value; // unquoted
    int line = 0;
    int key_column = 0;
    int value_column = 0;
};

struct ConfigSection {
    std::string name;
    int line = 0;
    std::vector<ConfigEntry> entries;

    const ConfigEntry* find(const std::string& key) const;
};

/// Sectioned key = value text as written, with source positions.
struct RawConfig {
    std::string origin;
    std::vector<ConfigSection> sections;

    const ConfigSection* find(const std::string& name) const;
};

RawConfig parse_config_text(const std::string& text, const std::string& origin = "<string>");
RawConfig load_config(const std::string& path);

/// Replaces the value of `section.key`; the key must already be present.
void override_value(RawConfig& raw, const std::string& dotted_key, const std::string& value);

/// Canonical text of a parsed config (sorted by section order, one key per line).
std::string render(const RawConfig& raw);

struct InitialSpec {
    enum class Kind { Gaussian, Indicator, Gibbs, Csv, Bump };
    Kind kind = Kind::Gaussian;
    std::vector<double> args;
    std::string path;
    std::string text;
};

struct CheckSpec {
    std::string name;
    double tolerance;
};

struct CheckOptions {
    double comparison_offset = 0.1;
    double propagation_threshold = 1e-10;
    double propagation_slack_cells = 5.0;
    int cost_samples = 1000;
    FluxMode crossval_flux_mode = FluxMode::CombinedArgument;
};

enum class Integrator { Fv, Jko };

struct ExperimentConfig {
    RawConfig raw;
    Integrator integrator = Integrator::Fv;
    RunConfig run{OperatorContext{CostFunction::classical(), Potential::zero(), Grid1D(0.0, 1.0, 2)}, 1.0, 0.4, {}, 1e-12};
    JkoConfig jko{CostFunction::classical(), Potential::zero()};
    int jko_steps = 10;
    InitialSpec initial;
    std::string cost_text;
    std::vector<CheckSpec> checks;
    CheckOptions options;
    std::string output_dir = "out";
};

/// Validates and types a raw config; relative file references resolve against `base_dir`.
ExperimentConfig build_config(const RawConfig& raw, const std::string& base_dir = ".");

ExperimentConfig load_experiment(const std::string& path);

const std::vector<std::string>& known_checks();
double default_tolerance(const std::string& check, Integrator integrator);

DensityField make_initial(const ExperimentConfig& cfg);

/// Pointwise form of an analytic initial condition (gaussian, bump, gibbs).
std::function<double(double)> initial_profile(const ExperimentConfig& cfg);

} // namespace fluxlim
