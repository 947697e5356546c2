#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gausstest/error.hpp"
#include "gausstest/fixtures.hpp"

namespace gausstest {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

// A bad configuration entry; line is 0 when it did not come from a file.
class ConfigError : public Error {
public:
    ConfigError(const std::string& field, int line, const std::string& what);
    const std::string& field() const { return field_; }
    int line() const { return line_; }

private:
    std::string field_;
    int line_;
};

struct ExperimentConfig {
    std::string command;  // state | rotation-test | covariance-test | bounds | hardness | moments
    std::optional<std::string> state;
    std::vector<std::string> pair;
    std::optional<int> cutoff;
    std::uint64_t seed = 0;
    double leakage_bound = kDefaultLeakageBound;
    std::string format = "json";
    std::optional<std::string> output;

    // rotation-test
    std::string test = "2";
    std::uint64_t rounds = 10000;
    double kappa = 8.0;

    // covariance-test, rotation-test plan, bounds
    std::optional<double> eps_a;
    std::optional<double> eps_b;
    double E = 1.0;
    double delta = 0.1;
    std::uint64_t shots = 100000;
    std::vector<std::uint64_t> scaling;

    // hardness
    int n = 2;
    std::vector<double> energies{2.0, 3.0, 4.0};
    double eps = 0.1;
    int trials = 20;
    int members = 5;
    int reps = 60;
};

// GAUSSTEST_SEED when set, otherwise 1.
std::uint64_t default_seed();

// Strict: unknown or misplaced keys raise ConfigError. `source_text` is used
// to locate the line of an offending key.
ExperimentConfig parse_config(const nlohmann::json& j, const std::string& source_text = "");
ExperimentConfig parse_config_text(const std::string& text);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// Named fixture, inline JSON ({"gaussian": {...}} or {"fock": {...}}) or @path.
Fixture parse_state_spec(const std::string& spec, std::optional<int> cutoff, double leakage_bound);

struct ExperimentOutcome {
    int exit_code = 0;
    // schema_version, tool_version, command, config, results, warnings,
    // wall_clock_seconds (and error on failure)
    nlohmann::json envelope;
    std::string csv;  // grid experiments in csv format
};

ExperimentOutcome run_experiment(const ExperimentConfig& cfg);

// The envelope without wall-clock time, for reproducibility comparisons.
nlohmann::json payload_of(const nlohmann::json& envelope);

}  // namespace gausstest
