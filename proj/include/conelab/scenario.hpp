#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "conelab/chart_metric.hpp"

namespace conelab {

inline constexpr const char* kProjectName = "conelab";
inline constexpr const char* kVersion = "0.1.0";

struct ScenarioConfig {
    std::string id;
    std::string description;
    uint64_t seed = 1;
    std::string raw_json;  // normalized config text
    std::string topology_notes;

    // metric
    std::string metric_builtin;                  // empty -> expression metric
    std::map<std::string, double> metric_params;
    std::vector<std::vector<std::string>> metric_components;  // row-major upper triangle ok
    std::string metric_regularity = "smooth";
    std::vector<double> chart_lo, chart_hi;
    double exclusion_radius = 0.0;

    // surface (optional)
    bool has_surface = false;
    double slice_time = 0.0;
    double sphere_radius = 0.0;
    int surface_samples = 32;

    // reachability grid (optional)
    bool has_grid = false;
    int time_cells = 0, spatial_cells = 0;
    double t_lo = 0.0, t_hi = 0.0;
    double grid_half_width = 0.0;  // 0 -> chart box
    int post_sweeps = 0;

    // regularization (optional)
    bool has_regularization = false;
    std::vector<double> eps_list;
    int verify_points = 200;
    int cone_samples = 128;
    // compact set for the convergence report; 0 keeps the mollified chart's
    // own cut-out (steep-core charts want a wider margin)
    double report_exclusion_radius = 0.0;

    // surrogate energy check (optional)
    bool has_nec = false;
    std::vector<double> nec_deltas;
    double nec_c1 = 0.5, nec_c2 = 2.0;
    int nec_axis_samples = 7;

    // focusing sweep (optional)
    bool has_focusing = false;
    double b_max = 1.0, b_step = 0.05;
    double expected_min_convergence = 0.0;

    // eps-limit comparison (optional)
    bool has_eps_compare = false;
    double eps_compare_delta = 0.1;

    // compactness probe (optional)
    bool has_compactness = false;
    int lambda_steps = 8;
    bool controlled_failure = false;

    // branching probe (optional)
    bool has_branching = false;
    std::vector<double> branch_x0;
    std::vector<double> branch_dir;
    std::vector<double> branch_sigmas;
};

struct ScenarioAssertion {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ScenarioResult {
    int exit_code = 2;  // 0 pass, 1 assertion failure, 2 error
    std::vector<ScenarioAssertion> assertions;
    std::string summary_path;
    std::string error;
};

struct ValidationIssue {
    enum class Level { kError, kWarning } level;
    std::string field;
    std::string message;
};

// Built-in scenario registry.
std::vector<std::pair<std::string, std::string>> list_scenarios();
std::optional<std::string> builtin_scenario_json(const std::string& name);

ScenarioConfig parse_scenario_json(const std::string& json_text);
ScenarioConfig load_scenario(const std::string& name_or_path);

// Static checks only; never runs numerics.
std::vector<ValidationIssue> validate_config(const ScenarioConfig& config);

MetricField build_scenario_metric(const ScenarioConfig& config);

struct RunOverrides {
    std::optional<uint64_t> seed;
    std::optional<int> grid_cells;
};

ScenarioResult run_scenario(const ScenarioConfig& config, const std::string& out_dir,
                            const RunOverrides& overrides = {});

}  // namespace conelab
