#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "conelab/scenario.hpp"
#include "conelab/chart_metric.hpp"

using namespace conelab;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("built-in scenario registry") {
    auto list = list_scenarios();
    CHECK(list.size() >= 3);
    bool has_mink = false, has_pg = false, has_c1 = false;
    for (const auto& [name, desc] : list) {
        CHECK_FALSE(desc.empty());
        has_mink = has_mink || name == "minkowski-sphere";
        has_pg = has_pg || name == "pg-trapped";
        has_c1 = has_c1 || name == "c1-model";
    }
    CHECK(has_mink);
    CHECK(has_pg);
    CHECK(has_c1);
    for (const auto& [name, desc] : list) {
        ScenarioConfig cfg = load_scenario(name);
        auto issues = validate_config(cfg);
        for (const auto& issue : issues)
            CHECK(issue.level != ValidationIssue::Level::kError);
    }
}

TEST_CASE("validation: increasing eps list names the field") {
    ScenarioConfig cfg = load_scenario("c1-model");
    cfg.eps_list = {0.025, 0.05, 0.1};
    auto issues = validate_config(cfg);
    bool found = false;
    for (const auto& issue : issues)
        if (issue.level == ValidationIssue::Level::kError &&
            issue.field == "regularization.eps_list")
            found = true;
    CHECK(found);
}

TEST_CASE("validation: inadmissible focusing grid warns about the threshold") {
    ScenarioConfig cfg = load_scenario("minkowski-sphere");
    cfg.b_max = 0.5;
    cfg.expected_min_convergence = 1.0;  // 1/c = 1 > b_max
    auto issues = validate_config(cfg);
    bool found = false;
    for (const auto& issue : issues)
        if (issue.level == ValidationIssue::Level::kWarning && issue.field == "focusing.b_max")
            found = true;
    CHECK(found);
}

TEST_CASE("expression metrics reproduce the built-in low-regularity model") {
    const char* json = R"({
      "scenario": "expr-c1",
      "metric": {
        "components": [["-1", "0", "0", "0"],
                       ["0", "1 + abs(x)^1.5", "0", "0"],
                       ["0", "0", "1", "0"],
                       ["0", "0", "0", "1"]],
        "regularity": "C1",
        "box": {"lo": [-1.5, -1.5, -1.5, -1.5], "hi": [1.5, 1.5, 1.5, 1.5]}
      }
    })";
    ScenarioConfig cfg = parse_scenario_json(json);
    CHECK(validate_config(cfg).empty());
    MetricField f = build_scenario_metric(cfg);
    CHECK(f.regularity == Regularity::kC1);
    CHECK(f.depends_on(1));
    CHECK_FALSE(f.depends_on(0));
    MetricField builtin = make_c1_model();
    for (double x1 : {-0.8, 0.0, 0.3, 1.2}) {
        VecN x{0.0, x1, 0.2, -0.4};
        MatN a = eval_metric(f, x);
        MatN b = eval_metric(builtin, x);
        CHECK(max_abs(a - b) <= 1e-12);
        // FD derivatives of the expression field against the analytic closure
        Deriv3 da = metric_first_derivs(f, x);
        Deriv3 db = metric_first_derivs(builtin, x);
        for (int k = 0; k < 4; ++k)
            CHECK(std::abs(da(k, 1, 1) - db(k, 1, 1)) <= 1e-6);
    }
}

TEST_CASE("bad configs are rejected with context") {
    CHECK_THROWS_AS(parse_scenario_json("{ not json"), ConfigError);
    CHECK_THROWS_AS(parse_scenario_json("{\"scenario\": \"x\"}"), ConfigError);
    CHECK_THROWS_AS(load_scenario("/no/such/file.json"), ConfigError);
}

TEST_CASE("runtime errors exit with code 2 and a structured report") {
    ScenarioConfig cfg = load_scenario("c1-model");
    cfg.metric_builtin = "no-such-metric";
    ScenarioResult res = run_scenario(cfg, "/tmp/conelab_err");
    CHECK(res.exit_code == 2);
    CHECK_FALSE(res.error.empty());
    const std::string err = slurp("/tmp/conelab_err/error.json");
    CHECK(err.find("no-such-metric") != std::string::npos);
}

TEST_CASE("same seed, byte-identical reports") {
    ScenarioConfig cfg = load_scenario("c1-model");
    RunOverrides ov;
    ScenarioResult r1 = run_scenario(cfg, "/tmp/conelab_det_a", ov);
    ScenarioResult r2 = run_scenario(cfg, "/tmp/conelab_det_b", ov);
    REQUIRE(r1.exit_code == 0);
    REQUIRE(r2.exit_code == 0);
    for (const char* f :
         {"summary.json", "regularization.csv", "nec_surrogate.csv", "branching.csv"}) {
        const std::string a = slurp(std::string("/tmp/conelab_det_a/") + f);
        const std::string b = slurp(std::string("/tmp/conelab_det_b/") + f);
        CHECK(a == b);
        CHECK_FALSE(a.empty());
    }
}

TEST_CASE("every table row carries the scenario id and version") {
    const std::string csv = slurp("/tmp/conelab_det_a/regularization.csv");
    std::stringstream ss(csv);
    std::string line;
    std::getline(ss, line);  // header
    int rows = 0;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        CHECK(line.rfind("c1-model," + std::string(kVersion), 0) == 0);
        ++rows;
    }
    CHECK(rows == 4);
}
