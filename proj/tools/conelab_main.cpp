#include <cstdio>
#include <string>

#include "CLI11.hpp"

#include "conelab/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"conelab: a desk-scale laboratory for low-regularity Lorentzian metrics"};
    app.require_subcommand(1);

    std::string scenario_arg, out_dir = "out";
    uint64_t seed = 0;
    int grid = 0;
    bool have_seed = false, have_grid = false;

    CLI::App* run = app.add_subcommand("run", "run a scenario (built-in name or config path)");
    run->add_option("scenario", scenario_arg, "built-in name or JSON config path")->required();
    run->add_option("--out", out_dir, "output directory (default: out)");
    run->add_option("--seed", seed, "override the config RNG seed")->each([&](std::string) {
        have_seed = true;
    });
    run->add_option("--grid", grid, "override grid resolution (cells per axis)")
        ->each([&](std::string) { have_grid = true; });

    CLI::App* list = app.add_subcommand("list", "list built-in scenarios");

    std::string validate_arg;
    CLI::App* validate = app.add_subcommand("validate", "check a config without running");
    validate->add_option("config", validate_arg, "built-in name or JSON config path")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (list->parsed()) {
            for (const auto& [name, desc] : conelab::list_scenarios())
                std::printf("%-24s %s\n", name.c_str(), desc.c_str());
            return 0;
        }
        if (validate->parsed()) {
            conelab::ScenarioConfig cfg = conelab::load_scenario(validate_arg);
            auto issues = conelab::validate_config(cfg);
            bool has_error = false;
            for (const auto& issue : issues) {
                const bool err = issue.level == conelab::ValidationIssue::Level::kError;
                has_error = has_error || err;
                std::printf("%s %s: %s\n", err ? "error" : "warning", issue.field.c_str(),
                            issue.message.c_str());
            }
            if (issues.empty()) std::printf("ok: %s\n", cfg.id.c_str());
            return has_error ? 1 : 0;
        }
        if (run->parsed()) {
            conelab::ScenarioConfig cfg = conelab::load_scenario(scenario_arg);
            auto issues = conelab::validate_config(cfg);
            for (const auto& issue : issues) {
                const bool err = issue.level == conelab::ValidationIssue::Level::kError;
                std::printf("%s %s: %s\n", err ? "error" : "warning", issue.field.c_str(),
                            issue.message.c_str());
                if (err) return 2;
            }
            conelab::RunOverrides ov;
            if (have_seed) ov.seed = seed;
            if (have_grid) ov.grid_cells = grid;
            conelab::ScenarioResult res = conelab::run_scenario(cfg, out_dir, ov);
            if (!res.error.empty()) {
                std::fprintf(stderr, "error: %s\n", res.error.c_str());
                return 2;
            }
            for (const auto& a : res.assertions)
                std::printf("[%s] %s: %s\n", a.pass ? "PASS" : "FAIL", a.name.c_str(),
                            a.detail.c_str());
            std::printf("summary: %s\n", res.summary_path.c_str());
            return res.exit_code;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
