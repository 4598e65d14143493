#include "conelab/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "conelab/causal_reach.hpp"
#include "conelab/curvature.hpp"
#include "conelab/errors.hpp"
#include "conelab/expr.hpp"
#include "conelab/focusing.hpp"
#include "conelab/geodesic_engine.hpp"
#include "conelab/regularizer.hpp"
#include "conelab/surface_geometry.hpp"

namespace conelab {

using json = nlohmann::ordered_json;

namespace {

const char* kMinkowskiSphereJson = R"JSON({
  "scenario": "minkowski-sphere",
  "description": "Flat chart with a round sphere r=2 in the t=0 slice: oracle geometry for normals, focusing flips, reachability and the bundle probe.",
  "seed": 20260808,
  "metric": {"builtin": "minkowski", "box_half_width": 4.0},
  "surface": {"slice_time": 0.0, "sphere_radius": 2.0, "samples": 24},
  "grid": {"time_cells": 36, "t_lo": -0.1, "t_hi": 3.2, "spatial_cells": 36, "half_width": 3.4},
  "regularization": {"eps_list": [0.2, 0.1, 0.05, 0.025], "verify_points": 200, "cone_samples": 128},
  "focusing": {"b_max": 2.5, "b_step": 0.25, "expected_min_convergence": 1.0},
  "eps_compare": {"delta": 0.1, "grid_cells": 20},
  "compactness": {"lambda_steps": 8, "controlled_failure": true},
  "topology_notes": "single chart; piercing by the t-translation field; separation/pi_1 hypotheses are metadata only"
})JSON";

const char* kPgTrappedJson = R"JSON({
  "scenario": "pg-trapped",
  "description": "Horizon-regular slicing of the m=1 black hole with an interior sphere r=1: genuinely trapped data driving the focusing contradiction mechanism.",
  "seed": 20260808,
  "metric": {"builtin": "pg", "mass": 1.0, "box_half_width": 1.7, "exclusion_radius": 0.05},
  "surface": {"slice_time": 0.0, "sphere_radius": 1.0, "samples": 24},
  "grid": {"time_cells": 32, "t_lo": -0.05, "t_hi": 0.75, "spatial_cells": 36, "half_width": 1.55, "post_sweeps": 2},
  "regularization": {"eps_list": [0.2, 0.1, 0.05, 0.025], "verify_points": 200, "cone_samples": 128, "report_exclusion_radius": 0.62},
  "focusing": {"b_max": 1.0, "b_step": 0.05, "expected_min_convergence": 2.0},
  "eps_compare": {"delta": 0.1, "grid_cells": 18},
  "compactness": {"lambda_steps": 8, "controlled_failure": false},
  "topology_notes": "single chart across the horizon; core r<0.05 excluded; completeness hypotheses are metadata only"
})JSON";

const char* kC1ModelJson = R"JSON({
  "scenario": "c1-model",
  "description": "The |x|^{3/2} low-regularity model: regularization bounds, surrogate energy sweep, branching funnel and distributional curvature pairing.",
  "seed": 20260808,
  "metric": {"builtin": "c1-model", "box_half_width": 1.5},
  "regularization": {"eps_list": [0.2, 0.1, 0.05, 0.025], "verify_points": 500, "cone_samples": 128},
  "nec": {"deltas": [0.05, 0.1, 0.2], "c1": 0.5, "c2": 2.0, "axis_samples": 7},
  "branching": {"x0": [0.0, 0.0, 0.0, 0.0], "dir": [1.0, 0.0, 0.0], "sigmas": [0.01, 0.001, 0.0001]},
  "topology_notes": "flat-in-disguise interior chart; low-regularity locus is the hyperplane x1=0"
})JSON";

const char* kSchwarzschildJson = R"JSON({
  "scenario": "schwarzschild-exterior",
  "description": "Exterior m=1 chart in quasi-Cartesian form: static-slice sphere data, generators and the focusing sweep on a vacuum field.",
  "seed": 20260808,
  "metric": {"builtin": "schwarzschild-cartesian", "mass": 1.0, "box_half_width": 8.0, "exclusion_radius": 2.4},
  "surface": {"slice_time": 0.0, "sphere_radius": 4.0, "samples": 24},
  "grid": {"time_cells": 30, "t_lo": -0.1, "t_hi": 4.5, "spatial_cells": 32, "half_width": 7.5, "post_sweeps": 1},
  "focusing": {"b_max": 4.0, "b_step": 0.25, "expected_min_convergence": 0.3},
  "topology_notes": "exterior chart only; horizon region excluded"
})JSON";

std::vector<double> to_doubles(const json& arr) {
    std::vector<double> out;
    for (const auto& v : arr) out.push_back(v.get<double>());
    return out;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> list_scenarios() {
    std::vector<std::pair<std::string, std::string>> out;
    for (const char* text : {kMinkowskiSphereJson, kPgTrappedJson, kC1ModelJson,
                             kSchwarzschildJson}) {
        json j = json::parse(text);
        out.emplace_back(j["scenario"].get<std::string>(),
                         j["description"].get<std::string>());
    }
    return out;
}

std::optional<std::string> builtin_scenario_json(const std::string& name) {
    for (const char* text : {kMinkowskiSphereJson, kPgTrappedJson, kC1ModelJson,
                             kSchwarzschildJson}) {
        json j = json::parse(text);
        if (j["scenario"].get<std::string>() == name) return std::string(text);
    }
    return std::nullopt;
}

ScenarioConfig parse_scenario_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    ScenarioConfig c;
    c.raw_json = j.dump(2);
    c.id = j.value("scenario", "unnamed");
    c.description = j.value("description", "");
    c.seed = j.value("seed", 1ull);
    c.topology_notes = j.value("topology_notes", "");

    if (!j.contains("metric")) throw ConfigError("config: missing 'metric'");
    const json& m = j["metric"];
    if (m.contains("builtin")) {
        c.metric_builtin = m["builtin"].get<std::string>();
        for (auto it = m.begin(); it != m.end(); ++it)
            if (it.value().is_number())
                c.metric_params[it.key()] = it.value().get<double>();
    } else if (m.contains("components")) {
        for (const auto& row : m["components"]) {
            std::vector<std::string> r;
            for (const auto& cell : row) r.push_back(cell.get<std::string>());
            c.metric_components.push_back(r);
        }
        c.metric_regularity = m.value("regularity", "smooth");
        if (!m.contains("box")) throw ConfigError("config: expression metric needs 'box'");
        c.chart_lo = to_doubles(m["box"]["lo"]);
        c.chart_hi = to_doubles(m["box"]["hi"]);
        c.exclusion_radius = m.value("exclusion_radius", 0.0);
    } else {
        throw ConfigError("config: metric needs 'builtin' or 'components'");
    }

    if (j.contains("surface")) {
        c.has_surface = true;
        c.slice_time = j["surface"].value("slice_time", 0.0);
        c.sphere_radius = j["surface"].value("sphere_radius", 1.0);
        c.surface_samples = j["surface"].value("samples", 32);
    }
    if (j.contains("grid")) {
        c.has_grid = true;
        c.time_cells = j["grid"].value("time_cells", 32);
        c.spatial_cells = j["grid"].value("spatial_cells", 32);
        c.t_lo = j["grid"].value("t_lo", 0.0);
        c.t_hi = j["grid"].value("t_hi", 1.0);
        c.grid_half_width = j["grid"].value("half_width", 0.0);
        c.post_sweeps = j["grid"].value("post_sweeps", 0);
    }
    if (j.contains("regularization")) {
        c.has_regularization = true;
        c.eps_list = to_doubles(j["regularization"]["eps_list"]);
        c.verify_points = j["regularization"].value("verify_points", 200);
        c.cone_samples = j["regularization"].value("cone_samples", 128);
        c.report_exclusion_radius =
            j["regularization"].value("report_exclusion_radius", 0.0);
    }
    if (j.contains("nec")) {
        c.has_nec = true;
        c.nec_deltas = to_doubles(j["nec"]["deltas"]);
        c.nec_c1 = j["nec"].value("c1", 0.5);
        c.nec_c2 = j["nec"].value("c2", 2.0);
        c.nec_axis_samples = j["nec"].value("axis_samples", 7);
    }
    if (j.contains("focusing")) {
        c.has_focusing = true;
        c.b_max = j["focusing"].value("b_max", 1.0);
        c.b_step = j["focusing"].value("b_step", 0.05);
        c.expected_min_convergence = j["focusing"].value("expected_min_convergence", 0.0);
    }
    if (j.contains("eps_compare")) {
        c.has_eps_compare = true;
        c.eps_compare_delta = j["eps_compare"].value("delta", 0.1);
        c.spatial_cells = std::max(c.spatial_cells, 1);
        // reuse grid cells unless the compare block overrides
        if (j["eps_compare"].contains("grid_cells"))
            c.metric_params["__eps_compare_cells"] =
                j["eps_compare"]["grid_cells"].get<double>();
    }
    if (j.contains("compactness")) {
        c.has_compactness = true;
        c.lambda_steps = j["compactness"].value("lambda_steps", 8);
        c.controlled_failure = j["compactness"].value("controlled_failure", false);
    }
    if (j.contains("branching")) {
        c.has_branching = true;
        c.branch_x0 = to_doubles(j["branching"]["x0"]);
        c.branch_dir = to_doubles(j["branching"]["dir"]);
        c.branch_sigmas = to_doubles(j["branching"]["sigmas"]);
    }
    return c;
}

ScenarioConfig load_scenario(const std::string& name_or_path) {
    if (auto builtin = builtin_scenario_json(name_or_path))
        return parse_scenario_json(*builtin);
    std::ifstream in(name_or_path);
    if (!in)
        throw ConfigError("scenario '" + name_or_path +
                          "' is neither a built-in name nor a readable file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario_json(ss.str());
}

std::vector<ValidationIssue> validate_config(const ScenarioConfig& c) {
    std::vector<ValidationIssue> issues;
    auto err = [&](const std::string& field, const std::string& msg) {
        issues.push_back({ValidationIssue::Level::kError, field, msg});
    };
    auto warn = [&](const std::string& field, const std::string& msg) {
        issues.push_back({ValidationIssue::Level::kWarning, field, msg});
    };

    if (!c.metric_builtin.empty()) {
        const std::string& n = c.metric_builtin;
        if (n != "minkowski" && n != "c1-model" && n != "c11-model" && n != "pg" &&
            n != "schwarzschild-cartesian" && n != "schwarzschild-spherical" &&
            n != "sphere-block" && n != "s3-block" && n != "nec-violator")
            err("metric.builtin", "unknown builtin metric '" + n + "'");
    } else {
        const size_t rows = c.metric_components.size();
        if (rows == 0) err("metric.components", "empty component table");
        for (const auto& row : c.metric_components)
            if (row.size() != rows)
                err("metric.components", "component table must be square");
        for (const auto& row : c.metric_components)
            for (const auto& cell : row) {
                try {
                    Expr::parse(cell);
                } catch (const ConfigError& e) {
                    err("metric.components", e.what());
                }
            }
        if (c.chart_lo.size() != rows || c.chart_hi.size() != rows)
            err("metric.box", "box dimensions must match component table");
    }

    if (c.has_regularization) {
        if (c.eps_list.empty()) err("regularization.eps_list", "empty eps list");
        for (size_t i = 0; i + 1 < c.eps_list.size(); ++i)
            if (c.eps_list[i] <= c.eps_list[i + 1])
                err("regularization.eps_list",
                    "eps list must be strictly decreasing (entry " + std::to_string(i + 1) +
                        " does not decrease)");
        if (!c.eps_list.empty() && c.eps_list.back() <= 0)
            err("regularization.eps_list", "eps values must be positive");
    }
    if (c.has_nec && !c.has_regularization && c.metric_regularity != "smooth" &&
        c.metric_builtin != "minkowski" && c.metric_builtin != "nec-violator")
        warn("nec", "surrogate check on a nonsmooth metric needs a regularization block");
    if (c.has_focusing) {
        if (c.b_step <= 0 || c.b_max <= 0) err("focusing", "b grid must be positive");
        if (c.expected_min_convergence > 0 &&
            c.b_max <= 1.0 / c.expected_min_convergence)
            warn("focusing.b_max",
                 "b_max <= 1/c: the focusing threshold delta(b,c) is only admissible for "
                 "b > 1/c, so no verdict can fire on this grid");
    }
    if (c.has_eps_compare && !(c.eps_compare_delta > 0 && c.eps_compare_delta < 1))
        err("eps_compare.delta", "delta must lie in (0,1)");
    if (c.has_eps_compare && !c.has_regularization)
        err("eps_compare", "needs a regularization block");
    if (c.has_compactness && !c.has_surface) err("compactness", "needs a surface block");
    if (c.has_grid && (c.time_cells < 2 || c.spatial_cells < 2))
        err("grid", "needs at least 2 cells per axis");
    return issues;
}

MetricField build_scenario_metric(const ScenarioConfig& c) {
    if (!c.metric_builtin.empty()) {
        const std::string& n = c.metric_builtin;
        auto p = [&](const std::string& key, double dflt) {
            auto it = c.metric_params.find(key);
            return it == c.metric_params.end() ? dflt : it->second;
        };
        if (n == "minkowski") return make_minkowski(4, p("box_half_width", 4.0));
        if (n == "c1-model") return make_c1_model(p("box_half_width", 1.5));
        if (n == "c11-model") return make_c11_model(p("box_half_width", 1.5));
        if (n == "pg")
            return make_painleve_gullstrand(p("mass", 1.0), p("box_half_width", 1.7),
                                            p("exclusion_radius", 0.05));
        if (n == "schwarzschild-cartesian")
            return make_schwarzschild_cartesian(p("mass", 1.0), p("box_half_width", 8.0),
                                                p("exclusion_radius", 2.4));
        if (n == "schwarzschild-spherical")
            return make_schwarzschild_spherical(p("mass", 1.0), p("r_min", 2.5),
                                                p("r_max", 20.0));
        if (n == "sphere-block") return make_sphere_block();
        if (n == "s3-block") return make_s3_block();
        if (n == "nec-violator") return make_nec_violator(p("box_half_width", 0.8));
        throw ConfigError("unknown builtin metric '" + n + "'");
    }

    const int dim = static_cast<int>(c.metric_components.size());
    auto exprs = std::make_shared<std::vector<std::vector<Expr>>>();
    exprs->resize(static_cast<size_t>(dim));
    uint32_t mask = 0;
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            Expr e = Expr::parse(c.metric_components[static_cast<size_t>(i)]
                                                    [static_cast<size_t>(j)]);
            for (int a = 0; a < dim; ++a)
                if (e.uses_axis(a)) mask |= (1u << a);
            (*exprs)[static_cast<size_t>(i)].push_back(std::move(e));
        }
    Box box;
    box.lo = VecN(dim);
    box.hi = VecN(dim);
    for (int a = 0; a < dim; ++a) {
        box.lo[a] = c.chart_lo[static_cast<size_t>(a)];
        box.hi[a] = c.chart_hi[static_cast<size_t>(a)];
    }
    box.exclusion_radius = c.exclusion_radius;
    Regularity reg = Regularity::kSmooth;
    if (c.metric_regularity == "C1") reg = Regularity::kC1;
    else if (c.metric_regularity == "C11") reg = Regularity::kC11;

    MetricField f = make_from_closures(
        dim, box, reg, c.id + "-metric",
        [exprs, dim](const VecN& x, MatN& g) {
            g = MatN(dim);
            for (int i = 0; i < dim; ++i)
                for (int j = i; j < dim; ++j) {
                    const double v = (*exprs)[static_cast<size_t>(i)][static_cast<size_t>(j)]
                                         .eval(x);
                    g(i, j) = v;
                    g(j, i) = v;
                }
        },
        nullptr, mask);
    return f;
}

// ---------------------------------------------------------------------------

namespace {

struct StageContext {
    const ScenarioConfig& cfg;
    std::string out_dir;
    MetricField metric;
    BackgroundMetric h;
    std::vector<ScenarioAssertion> assertions;
    json summary;

    std::optional<RegularizationFamily> family;
    std::optional<HypersurfaceData> slice;
    std::optional<SurfaceLevelSet> surf;
    std::optional<CausalGrid> grid;
    std::optional<GeneratorBundle> horizon;
    double measured_c_min = 0.0;

    void check(const std::string& name, bool pass, const std::string& detail) {
        assertions.push_back({name, pass, detail});
    }
    std::string path(const std::string& file) const { return out_dir + "/" + file; }
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void stage_regularization(StageContext& ctx) {
    const ScenarioConfig& c = ctx.cfg;
    ctx.family = build_regularization_family(ctx.metric, c.eps_list, ctx.h, c.verify_points,
                                             c.cone_samples, c.seed);
    ctx.check("cone_nesting_calibrated", true,
              "c_corr = " + fmt(ctx.family->c_corr) + " at " +
                  std::to_string(c.verify_points) + " verification points");

    Box K = ctx.family->mollified.front().domain;
    if (c.report_exclusion_radius > K.exclusion_radius)
        K.exclusion_radius = c.report_exclusion_radius;
    ConvergenceReport rep = convergence_report(*ctx.family, K);
    write_convergence_csv(ctx.path("regularization.csv"), rep, c.id, kVersion);
    ctx.check("regularization_ratio_bounded", rep.ratios_bounded,
              "c_K = " + fmt(rep.c_K));
    ctx.check("regularization_c0_converges", rep.c0_converges,
              "sup|g_check - g|: first " + fmt(rep.rows.front().sup_narrow_minus_base) +
                  " -> last " + fmt(rep.rows.back().sup_narrow_minus_base));
    ctx.check("regularization_c1_monotone", rep.c1_monotone,
              "derivative sup-error monotone along the sweep");
    ctx.summary["regularization"] = {{"c_corr", ctx.family->c_corr},
                                     {"c_K", rep.c_K},
                                     {"pass", rep.pass}};
}

void stage_nec(StageContext& ctx) {
    const ScenarioConfig& c = ctx.cfg;
    std::vector<NecReport> table;
    std::vector<double> deltas = c.nec_deltas;
    std::sort(deltas.begin(), deltas.end());
    json eps0_json = json::object();

    std::vector<std::pair<double, MetricField>> fields;
    if (ctx.family) {
        for (double e : c.eps_list) fields.emplace_back(e, narrow_member(*ctx.family, e));
    } else {
        fields.emplace_back(0.0, ctx.metric);
    }

    std::map<double, double> eps0;  // delta -> eps0
    for (double delta : deltas) {
        double e0 = 0.0;
        bool chain = true;
        // scan from the smallest eps upward
        for (auto it = fields.rbegin(); it != fields.rend(); ++it) {
            Box K = it->second.domain;
            NecReport rep = nec_surrogate_check(it->second, K, c.nec_c1, c.nec_c2, delta,
                                                ctx.h, c.nec_axis_samples);
            rep.eps = it->first;
            table.push_back(rep);
            if (chain && rep.pass)
                e0 = it->first;
            else
                chain = false;
        }
        eps0[delta] = e0;
        eps0_json[fmt(delta)] = e0;
    }
    write_nec_csv(ctx.path("nec_surrogate.csv"), table, c.id, kVersion);

    bool monotone = true;
    double prev = -1;
    for (const auto& [d, e0] : eps0) {
        if (e0 < prev) monotone = false;
        prev = e0;
    }
    ctx.check("nec_eps0_monotone_in_delta", monotone, "eps0 table is monotone in delta");
    if (!deltas.empty() && ctx.family) {
        const double mid_delta = deltas[deltas.size() / 2];
        const bool exists = eps0[mid_delta] > 0;
        ctx.check("nec_eps0_exists", exists,
                  "eps0(" + fmt(mid_delta) + ") = " + fmt(eps0[mid_delta]));
    }
    ctx.summary["nec"] = {{"eps0", eps0_json}};
}

void stage_surface(StageContext& ctx) {
    const ScenarioConfig& c = ctx.cfg;
    ctx.slice = HypersurfaceData::constant_slice(c.slice_time);
    ctx.surf = SurfaceLevelSet::sphere(ctx.metric.dim, c.sphere_radius);
    TrappedReport rep =
        inner_trapped_test(ctx.metric, *ctx.slice, *ctx.surf, c.surface_samples, ctx.h);
    write_trapped_json(ctx.path("trapped.json"), rep, c.id, kVersion);
    ctx.measured_c_min = rep.min_k_minus;
    ctx.check("surface_inner_trapped", rep.trapped,
              "min k_- = " + fmt(rep.min_k_minus) + " over " + std::to_string(rep.samples) +
                  " samples");
    std::string verdict;
    const double c_avg = rep.min_k_minus / (ctx.metric.dim - 2);
    if (!rep.trapped)
        verdict = "not inner trapped: no focusing mechanism";
    else if (c_avg > 2.0)
        verdict = "trapped with c > 2: focusing contradiction mechanism active";
    else
        verdict = "no contradiction mechanism (not trapped strongly enough for c>2 branch)";
    ctx.summary["surface"] = {{"trapped", rep.trapped},
                              {"min_k_minus", rep.min_k_minus},
                              {"verdict", verdict}};
}

CausalGridSpec make_grid_spec(const StageContext& ctx, int spatial_cells, int time_cells) {
    const ScenarioConfig& c = ctx.cfg;
    CausalGridSpec spec;
    spec.dim = ctx.metric.dim;
    spec.lo = VecN(spec.dim);
    spec.spacing = VecN(spec.dim);
    spec.counts[0] = time_cells;
    spec.lo[0] = c.t_lo;
    spec.spacing[0] = (c.t_hi - c.t_lo) / (time_cells - 1);
    for (int a = 1; a < spec.dim; ++a) {
        double half = c.grid_half_width;
        if (half <= 0)
            half = 0.5 * (ctx.metric.domain.hi[a] - ctx.metric.domain.lo[a]) * 0.95;
        spec.lo[a] = -half;
        spec.spacing[a] = 2.0 * half / (spatial_cells - 1);
        spec.counts[static_cast<size_t>(a)] = spatial_cells;
    }
    return spec;
}

void stage_grid(StageContext& ctx) {
    const ScenarioConfig& c = ctx.cfg;
    CausalGridSpec spec = make_grid_spec(ctx, c.spatial_cells, c.time_cells);
    EikonalOptions eopts;
    eopts.post_sweeps = c.post_sweeps;

    std::vector<VecN> sources;
    if (ctx.surf) {
        // source sampling must outresolve the grid to keep the arrival field
        // faithful to the continuum surface
        sources = sample_surface(ctx.metric, *ctx.slice, *ctx.surf,
                                 std::max(768, c.surface_samples), ctx.h);
    } else {
        VecN origin(ctx.metric.dim);
        origin[0] = c.t_lo;
        sources.push_back(origin);
    }
    ctx.grid = future_sets(ctx.metric, sources, spec, ctx.h, eopts);
    write_masks(ctx.path("masks"), *ctx.grid, c.id, kVersion);
    // mask sanity
    bool nested = true;
    for (size_t i = 0; i < ctx.grid->J.size(); ++i)
        if (ctx.grid->I[i] && !ctx.grid->J[i]) nested = false;
    ctx.check("masks_I_subset_J", nested, "chronological cells all causal");
    ctx.summary["grid"] = {{"time_cells", c.time_cells},
                           {"spatial_cells", c.spatial_cells}};
}

void stage_generators(StageContext& ctx) {
    const ScenarioConfig& c = ctx.cfg;
    ctx.horizon = boundary_generators(ctx.metric, *ctx.grid, *ctx.slice, *ctx.surf,
                                      GeneratorDirection::kKMinus, c.surface_samples, ctx.h,
                                      c.t_hi - c.t_lo);
    std::FILE* f = std::fopen(ctx.path("generators.csv").c_str(), "w");
    if (!f) throw ConfigError("cannot open generators.csv");
    std::fprintf(f, "scenario,version,id,convergence,exit_param,exit_reason\n");
    for (size_t i = 0; i < ctx.horizon->generators.size(); ++i)
        std::fprintf(f, "%s,%s,%zu,%.12g,%.12g,%s\n", c.id.c_str(), kVersion, i,
                     ctx.horizon->start_convergence[i], ctx.horizon->exit_params[i],
                     ctx.horizon->exit_reason[i] == 0
                         ? "entered_I"
                         : (ctx.horizon->exit_reason[i] == 1 ? "domain_exit" : "range_end"));
    std::fclose(f);
    if (!ctx.horizon->generators.empty())
        write_trajectory_csv(ctx.path("generator0.csv"), ctx.horizon->generators.front(),
                             c.id, kVersion);
    ctx.check("generators_exist", !ctx.horizon->generators.empty(),
              std::to_string(ctx.horizon->generators.size()) + " inward generators");
    ctx.summary["generators"] = {{"count", ctx.horizon->generators.size()}};
}

void stage_focusing(StageContext& ctx) {
    const ScenarioConfig& c = ctx.cfg;
    // curvature source: the base field when smooth, else the tightest narrowed member
    const MetricField* ric_field = &ctx.metric;
    std::optional<MetricField> narrowed;
    if (ctx.metric.regularity != Regularity::kSmooth) {
        if (!ctx.family)
            throw ConfigError("focusing on a nonsmooth metric needs a regularization block");
        narrowed = narrow_member(*ctx.family, c.eps_list.back());
        ric_field = &*narrowed;
    }
    std::vector<double> b_grid;
    for (double b = c.b_step; b <= c.b_max + 1e-12; b += c.b_step) b_grid.push_back(b);

    std::vector<FocusingReport> reports;
    bool consistency = true;
    bool mechanism = true;
    int predicted = 0, core_deaths = 0;
    const int n = ctx.metric.dim;
    const double excl = ctx.metric.domain.exclusion_radius;
    for (size_t gi = 0; gi < ctx.horizon->generators.size(); ++gi) {
        const CurveTrajectory& g = ctx.horizon->generators[gi];
        const double kval = ctx.horizon->start_convergence[gi];
        std::optional<double> bound;
        try {
            bound = maximizing_bound(*ric_field, g, kval, b_grid);
        } catch (const std::runtime_error&) {
            continue;
        }
        // back off the horizon so curvature stencils stay inside the chart
        double b_report = bound ? *bound : std::min(c.b_max, 0.95 * g.t_end());
        if (b_report <= 0) continue;
        FocusingReport rep;
        bool have_rep = false;
        for (int attempt = 0; attempt < 3 && !have_rep; ++attempt) {
            try {
                rep = focusing_functional(*ric_field, g, kval, b_report);
                have_rep = true;
            } catch (const std::runtime_error&) {
                b_report *= 0.9;
            }
        }
        if (!have_rep) continue;
        rep.geodesic_id = static_cast<int>(gi);
        reports.push_back(rep);
        if (bound) ++predicted;
        // threshold consistency on this run (per-direction convergence)
        if (rep.c > 0 && b_report > 1.0 / rep.c) {
            const double thr = delta_threshold(b_report, rep.c, n);
            if (rep.min_ric >= -thr &&
                rep.verdict != FocusingVerdict::kFocalPointPredicted)
                consistency = false;
        }
        // strong-trapping branch: the generator either focuses by b = 1 or
        // terminates at the singular core before its admissible scale 1/c
        // (incompleteness witnessed; it cannot be maximizing to b = 1 either
        // way)
        if (rep.c > 2.0 && rep.min_ric >= -3.0 * (n - 2)) {
            const bool fires = bound && *bound <= 1.0;
            bool dies_at_core = false;
            if (!fires && ctx.horizon->exit_reason[gi] == 1 && excl > 0) {
                const VecN& last = g.points.back();
                double r2 = 0;
                for (int a = 1; a < n; ++a) r2 += last[a] * last[a];
                dies_at_core = std::sqrt(r2) <= 2.0 * excl + 0.1 &&
                               ctx.horizon->exit_params[gi] <= 1.0 / rep.c + c.b_step;
            }
            if (dies_at_core) ++core_deaths;
            if (!fires && !dies_at_core) mechanism = false;
        }
    }
    write_focusing_csv(ctx.path("focusing.csv"), reports, c.id, kVersion);
    if (!reports.empty())
        write_focusing_json(ctx.path("focusing0.json"), reports.front(), c.id, kVersion);
    ctx.check("focusing_threshold_consistency", consistency,
              "predicted whenever min Ric >= -delta(b,c) and b > 1/c");
    if (ctx.measured_c_min / (n - 2) > 2.0)
        ctx.check("focusing_c_gt_2_mechanism", mechanism,
                  "every c > 2 generator focuses by b = 1 or dies at the core before "
                  "1/c (" +
                      std::to_string(predicted) + " predicted, " +
                      std::to_string(core_deaths) + " core terminations)");
    ctx.summary["focusing"] = {{"generators_reported", reports.size()},
                               {"focal_point_predicted", predicted},
                               {"core_terminations", core_deaths}};
}

void stage_eps_compare(StageContext& ctx) {
    const ScenarioConfig& c = ctx.cfg;
    int cells = 18;
    auto it = c.metric_params.find("__eps_compare_cells");
    if (it != c.metric_params.end()) cells = static_cast<int>(it->second);
    CausalGridSpec spec = make_grid_spec(ctx, cells, std::max(8, c.time_cells / 2));
    // only compare a few generators to keep the sweep tight
    GeneratorBundle sub;
    for (size_t i = 0; i < ctx.horizon->generators.size();
         i += std::max<size_t>(1, ctx.horizon->generators.size() / 4)) {
        sub.generators.push_back(ctx.horizon->generators[i]);
        sub.start_points.push_back(ctx.horizon->start_points[i]);
        sub.start_velocities.push_back(ctx.horizon->start_velocities[i]);
        sub.start_convergence.push_back(ctx.horizon->start_convergence[i]);
        sub.exit_params.push_back(ctx.horizon->exit_params[i]);
        sub.exit_reason.push_back(ctx.horizon->exit_reason[i]);
    }
    EpsCompareReport rep = eps_maximizer_compare(*ctx.family, *ctx.slice, *ctx.surf, sub,
                                                 c.eps_compare_delta, spec, ctx.h);
    write_eps_compare_csv(ctx.path("eps_compare.csv"), rep, c.id, kVersion);
    ctx.check("eps_generator_distance_decreases", rep.distances_decrease,
              "sup distance " + fmt(rep.rows.front().sup_distance) + " -> " +
                  fmt(rep.rows.back().sup_distance));
    ctx.summary["eps_compare"] = {{"first", rep.rows.front().sup_distance},
                                  {"last", rep.rows.back().sup_distance},
                                  {"pass", rep.distances_decrease}};
}

void stage_compactness(StageContext& ctx) {
    const ScenarioConfig& c = ctx.cfg;
    CausalGridSpec spec = make_grid_spec(ctx, c.spatial_cells, c.time_cells);
    CompactnessReport rep =
        compactness_probe(ctx.metric, *ctx.slice, *ctx.surf, ctx.measured_c_min,
                          c.lambda_steps, *ctx.horizon, spec, ctx.h);
    write_compactness_json(ctx.path("compactness.json"), rep, c.id, kVersion);
    ctx.check("compactness_probe", rep.pass,
              std::to_string(rep.covered) + "/" + std::to_string(rep.total) +
                  " horizon samples covered, lambda_max = " + fmt(rep.lambda_max));
    if (c.controlled_failure) {
        CompactnessReport fail =
            compactness_probe(ctx.metric, *ctx.slice, *ctx.surf, ctx.measured_c_min,
                              c.lambda_steps, *ctx.horizon, spec, ctx.h,
                              1.0 / ctx.measured_c_min);
        write_compactness_json(ctx.path("compactness_controlled_failure.json"), fail, c.id,
                               kVersion);
        ctx.check("compactness_controlled_failure", !fail.pass && !fail.violations.empty(),
                  "halved bundle range misses " +
                      std::to_string(fail.violations.size()) + " horizon samples");
    }
    ctx.summary["compactness"] = {{"pass", rep.pass},
                                  {"covered", rep.covered},
                                  {"total", rep.total}};
}

void stage_branching(StageContext& ctx) {
    const ScenarioConfig& c = ctx.cfg;
    VecN x0(ctx.metric.dim);
    for (int a = 0; a < ctx.metric.dim && a < static_cast<int>(c.branch_x0.size()); ++a)
        x0[a] = c.branch_x0[static_cast<size_t>(a)];
    // null initial velocity from the requested spatial direction
    VecN u(ctx.metric.dim);
    for (int a = 1; a < ctx.metric.dim; ++a)
        u[a] = (a - 1) < static_cast<int>(c.branch_dir.size())
                   ? c.branch_dir[static_cast<size_t>(a - 1)]
                   : 0.0;
    const double nrm = ctx.h.norm(u);
    if (nrm < 1e-12) throw ConfigError("branching: zero direction");
    u *= 1.0 / nrm;
    MatN g = eval_metric_raw(ctx.metric, x0);
    u[0] = null_time_component(g, u);
    FunnelReport rep = branching_probe(ctx.metric, x0, u, c.branch_sigmas, ctx.h);
    write_funnel_csv(ctx.path("branching.csv"), rep, c.id, kVersion);
    ctx.check("branching_probe_reported", true, rep.note);
    ctx.summary["branching"] = {{"flagged", rep.flagged}, {"note", rep.note}};
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& config, const std::string& out_dir,
                            const RunOverrides& overrides) {
    ScenarioResult result;
    ScenarioConfig cfg = config;
    if (overrides.seed) cfg.seed = *overrides.seed;
    if (overrides.grid_cells) {
        cfg.spatial_cells = *overrides.grid_cells;
        cfg.time_cells = *overrides.grid_cells;
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);

    StageContext ctx{cfg, out_dir, MetricField{}, BackgroundMetric::euclidean(4), {}, {},
                     {},  {},      {},            {},                            {}, 0.0};
    try {
        ctx.metric = build_scenario_metric(cfg);
        ctx.h = BackgroundMetric::euclidean(ctx.metric.dim);
        ctx.summary["scenario"] = cfg.id;
        ctx.summary["version"] = kVersion;
        ctx.summary["seed"] = cfg.seed;
        ctx.summary["topology_notes"] = cfg.topology_notes;

        // signature spot check at the chart center
        {
            VecN mid(ctx.metric.dim);
            for (int a = 0; a < ctx.metric.dim; ++a)
                mid[a] = 0.5 * (ctx.metric.domain.lo[a] + ctx.metric.domain.hi[a]);
            if (!ctx.metric.domain.contains(mid)) {
                mid[1] = 0.75 * ctx.metric.domain.hi[1];
            }
            MatN g = eval_metric(ctx.metric, mid);
            (void)g;
            ctx.check("metric_signature", true, "Lorentzian at the chart midpoint");
        }

        if (cfg.has_regularization) stage_regularization(ctx);
        if (cfg.has_nec) stage_nec(ctx);
        if (cfg.has_surface) stage_surface(ctx);
        if (cfg.has_grid && cfg.has_surface) stage_grid(ctx);
        if (ctx.grid && ctx.surf) stage_generators(ctx);
        if (cfg.has_focusing && ctx.horizon) stage_focusing(ctx);
        if (cfg.has_eps_compare && ctx.family && ctx.horizon) stage_eps_compare(ctx);
        if (cfg.has_compactness && ctx.horizon) stage_compactness(ctx);
        if (cfg.has_branching) stage_branching(ctx);
    } catch (const std::exception& e) {
        result.exit_code = 2;
        result.error = e.what();
        json err;
        err["scenario"] = cfg.id;
        err["version"] = kVersion;
        err["error"] = e.what();
        std::ofstream out(out_dir + "/error.json");
        out << err.dump(2) << "\n";
        return result;
    }

    bool all_pass = true;
    json checks = json::array();
    for (const auto& a : ctx.assertions) {
        all_pass = all_pass && a.pass;
        checks.push_back({{"name", a.name}, {"pass", a.pass}, {"detail", a.detail}});
    }
    ctx.summary["assertions"] = checks;
    ctx.summary["all_pass"] = all_pass;

    result.summary_path = out_dir + "/summary.json";
    std::ofstream out(result.summary_path);
    out << ctx.summary.dump(2) << "\n";
    out.close();

    result.assertions = ctx.assertions;
    result.exit_code = all_pass ? 0 : 1;
    return result;
}

}  // namespace conelab
