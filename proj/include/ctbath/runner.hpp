#pragma once

// Scenario configuration, orchestration and CSV/JSON output.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ctbath/bath_ensemble.hpp"
#include "ctbath/decay_fit.hpp"
#include "ctbath/spin_core.hpp"

namespace ctbath {

/// Failure with a machine-readable code, reported as {"error": {...}}.
class RunError : public std::runtime_error {
public:
    RunError(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

enum class Scenario { decay, detuning_sweep, field_scan, heuristics };

const char* to_string(Scenario scenario);
Scenario parse_scenario(const std::string& name);

enum class TimeGridKind { linear, geometric };

struct TimeGrid {
    std::optional<double> t_max;  // s; unset means chosen from the heuristic T2
    int points = 200;
    TimeGridKind kind = TimeGridKind::linear;
};

/// Total echo times: 0 followed by points - 1 samples up to t_max
/// (geometric grids start at t_max / 1000).
std::vector<double> make_time_grid(const TimeGrid& grid, double t_max);

struct SweepSettings {
    std::vector<double> widths_hz = {0.0, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7};
    double high_field = 3.0;  // T
    bool perturbed_branch = false;
};

struct ScanSettings {
    double b_min = 0.0;    // T
    double b_max = 0.6;    // T
    double step = 1.0e-4;  // T
    std::vector<std::pair<int, int>> lines = {{14, 7}, {13, 8}, {12, 9},
                                              {11, 10}, {15, 6}, {16, 5}};
};

struct RunConfig {
    std::vector<Scenario> scenarios = {Scenario::decay};
    DonorSpecies species = DonorSpecies::bismuth();
    int upper = 14;
    int lower = 7;
    double label_field = 0.0799;  // T, field at which (upper, lower) are read
    std::optional<double> b0;     // T; unset means the line's first CT
    SampleSpec sample;
    std::optional<double> silicon_halfwidth_hz;  // set: w_OH from the estimator
    TimeGrid time;
    DecayModel fit_model = DecayModel::stretched;
    SweepSettings sweep;
    ScanSettings scan;
};

/// Parses a configuration document. Keys carry unit suffixes; unknown keys
/// and malformed values throw RunError("config_invalid"). A run manifest is
/// accepted too: its embedded "config" is used.
RunConfig parse_config(const nlohmann::json& document);

/// Fully resolved configuration, accepted back by parse_config.
nlohmann::json to_json(const RunConfig& config);

/// Applies "dotted.path=value" to a configuration document; the value is
/// parsed as JSON, falling back to a plain string.
void apply_override(nlohmann::json& document, const std::string& assignment);

/// Hex SHA-256 of the canonical serialisation of the resolved configuration.
std::string config_hash(const RunConfig& config);

struct RunOptions {
    std::filesystem::path out_dir = ".";
    int threads = 1;
};

/// Runs every configured scenario, writes its files into out_dir and
/// returns the manifest (also written as manifest.json).
nlohmann::json run(const RunConfig& config, const RunOptions& options);

/// Formats a double with 17 significant digits, independent of locale.
std::string format_double(double value);

}  // namespace ctbath
