#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "macalloc/allocation.hpp"
#include "macalloc/capacity.hpp"
#include "macalloc/fading.hpp"
#include "macalloc/optimize.hpp"
#include "macalloc/utility.hpp"

#include "json.hpp"

namespace macalloc {

// Parses a TOML document (the subset used by scenario files: sections,
// dotted sections, key = value, strings, numbers, booleans, arrays and
// inline tables) into a JSON object. Throws ConfigError with a line hint.
nlohmann::json parse_toml(const std::string& text);

// Reads a config file; .json parses as JSON, anything else as TOML.
nlohmann::json load_config_file(const std::string& path);

enum class RunMode { fixed_power, power_control };

struct SolverConfig {
    double gap_tol = 1e-6;
    int max_iter = 100000;
    StepRule step_rule = StepRule::limited_max;
    double quad_tol = 1e-8;
    double power_rel_tol = 1e-5;
};

struct BoundsConfig {
    std::vector<double> epsilon_grid;  // default: 20 points on (0,1]
    std::vector<double> cov_scales{1.0, 0.25, 0.0625};
    std::size_t constant_states = 200;
    std::size_t points_per_state = 150;
};

struct SimulateConfig {
    std::string policy = "greedy";      // greedy | linear_greedy | fixed
    std::vector<double> policy_mu;      // linear_greedy weights
    std::vector<double> policy_rates;   // fixed policy output
};

// Fully validated run description. `canonical` is the defaults-applied JSON
// view whose hash identifies the run regardless of key order in the file.
struct ScenarioConfig {
    Scenario scenario;
    RunMode mode = RunMode::fixed_power;
    std::vector<double> avg_power;  // power-control budget
    std::uint64_t seed = 0;
    std::size_t samples = 10000;
    SolverConfig solver;
    BoundsConfig bounds;
    SimulateConfig simulate;
    std::vector<std::vector<double>> region_states;
    std::vector<std::vector<double>> boundary_mu;
    std::string out_dir = "out";

    nlohmann::json canonical;

    FadingModel fading() const;
    UtilityFunction utility() const;
    PowerBudget budget() const;

  private:
    friend ScenarioConfig make_scenario_config(const nlohmann::json& doc);
    nlohmann::json fading_spec_;
    nlohmann::json utility_spec_;
};

ScenarioConfig make_scenario_config(const nlohmann::json& doc);
ScenarioConfig load_scenario_config(const std::string& path);

// FNV-1a over the canonical dump: stable under key reordering because the
// canonical JSON object iterates its keys in sorted order.
std::string config_hash(const nlohmann::json& canonical);

}  // namespace macalloc
