#include "conelab/focusing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "conelab/curvature.hpp"
#include "conelab/errors.hpp"

namespace conelab {

double delta_threshold(double b, double c, int n) {
    if (n < 3) throw InvalidInput("delta_threshold: n >= 3 required");
    if (!(c > 0)) throw InvalidInput("delta_threshold: c > 0 required");
    if (!(b > 1.0 / c))
        throw InvalidInput("delta_threshold: b <= 1/c (threshold nonpositive regime)");
    return 3.0 / (b * b) * (n - 2) * (b * c - 1.0);
}

FocusingReport focusing_functional(const MetricField& ric_field,
                                   const CurveTrajectory& geodesic, double k_start,
                                   double b, const FocusingOptions& opts) {
    const int n = ric_field.dim;
    if (geodesic.t_end() < b - 1e-12)
        throw InvalidInput("focusing_functional: geodesic does not exist to parameter b");
    // null check at the start
    {
        MatN g = eval_metric_raw(ric_field, geodesic.points.front());
        const VecN& v = geodesic.velocities.front();
        if (std::abs(quad_form(g, v, v)) > 1e-6 * std::max(1.0, dot(v, v)))
            throw InvalidInput("focusing_functional: initial velocity is not null");
    }
    auto f = opts.f ? opts.f : [](double t, double bb) { return 1.0 - t / bb; };
    auto fp = opts.fp ? opts.fp : [](double, double bb) { return -1.0 / bb; };

    FocusingReport rep;
    rep.b = b;
    rep.c = k_start / (n - 2);
    rep.rhs = k_start;  // (n-2) * c
    rep.min_ric = std::numeric_limits<double>::infinity();

    auto integrand = [&](double t, double& ric_out) {
        VecN x = geodesic.point_at(t);
        VecN v = geodesic.velocity_at(t);
        RicciAt rc = ricci(ric_field, x, opts.ric_fd_step);
        const double rvv = quad_form(rc.ric, v, v);
        ric_out = rvv;
        const double ft = f(t, b), fpt = fp(t, b);
        return (n - 2) * fpt * fpt - ft * ft * rvv;
    };

    // composite Simpson over [0, b] following the trajectory's samples, with
    // extra panels near t = b
    std::vector<double> knots;
    knots.push_back(geodesic.t_begin());
    for (double t : geodesic.params)
        if (t > knots.back() + 1e-14 && t < b) knots.push_back(t);
    const double tail = knots.back();
    const int extra = std::max(2, opts.refine_near_end);
    for (int i = 1; i <= extra; ++i)
        knots.push_back(tail + (b - tail) * static_cast<double>(i) / extra);

    double lhs = 0;
    for (size_t k = 0; k + 1 < knots.size(); ++k) {
        const double a = knots[k], bb = knots[k + 1];
        const double m = 0.5 * (a + bb);
        double r1, r2, r3;
        const double fa = integrand(a, r1);
        const double fm = integrand(m, r2);
        const double fb = integrand(bb, r3);
        lhs += (bb - a) / 6.0 * (fa + 4.0 * fm + fb);
        rep.min_ric = std::min({rep.min_ric, r1, r2, r3});
    }
    rep.lhs = lhs;
    try {
        rep.delta_threshold = delta_threshold(b, rep.c, n);
    } catch (const InvalidInput&) {
        rep.delta_threshold = 0.0;  // outside the admissible regime
    }
    rep.verdict = (lhs <= rep.rhs) ? FocusingVerdict::kFocalPointPredicted
                                   : FocusingVerdict::kInconclusive;
    return rep;
}

std::optional<double> maximizing_bound(const MetricField& ric_field,
                                       const CurveTrajectory& geodesic, double k_start,
                                       const std::vector<double>& b_grid,
                                       const FocusingOptions& opts) {
    for (double b : b_grid) {
        if (b <= 0) continue;
        if (geodesic.t_end() < b - 1e-12) break;  // does not exist that long
        FocusingReport rep = focusing_functional(ric_field, geodesic, k_start, b, opts);
        if (rep.verdict == FocusingVerdict::kFocalPointPredicted) return b;
    }
    return std::nullopt;
}

void write_focusing_csv(const std::string& path, const std::vector<FocusingReport>& reports,
                        const std::string& scenario_id, const std::string& version) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw ConfigError("cannot open " + path);
    std::fprintf(f,
                 "scenario,version,geodesic_id,c,b,lhs,rhs,delta_threshold,min_ric,"
                 "verdict\n");
    for (const auto& r : reports)
        std::fprintf(f, "%s,%s,%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%s\n",
                     scenario_id.c_str(), version.c_str(), r.geodesic_id, r.c, r.b, r.lhs,
                     r.rhs, r.delta_threshold, r.min_ric,
                     r.verdict == FocusingVerdict::kFocalPointPredicted
                         ? "focal_point_predicted"
                         : "inconclusive");
    std::fclose(f);
}

void write_focusing_json(const std::string& path, const FocusingReport& r,
                         const std::string& scenario_id, const std::string& version) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw ConfigError("cannot open " + path);
    std::fprintf(f, "{\n  \"scenario\": \"%s\",\n  \"version\": \"%s\",\n",
                 scenario_id.c_str(), version.c_str());
    std::fprintf(f, "  \"geodesic_id\": %d,\n  \"b\": %.12g,\n  \"c\": %.12g,\n",
                 r.geodesic_id, r.b, r.c);
    std::fprintf(f, "  \"lhs\": %.12g,\n  \"rhs\": %.12g,\n", r.lhs, r.rhs);
    std::fprintf(f, "  \"delta_threshold\": %.12g,\n  \"min_ric\": %.12g,\n",
                 r.delta_threshold, r.min_ric);
    std::fprintf(f, "  \"nu_multiplier\": %.12g,\n", r.nu_multiplier);
    std::fprintf(f, "  \"verdict\": \"%s\"\n}\n",
                 r.verdict == FocusingVerdict::kFocalPointPredicted ? "focal_point_predicted"
                                                                    : "inconclusive");
    std::fclose(f);
}

}  // namespace conelab
