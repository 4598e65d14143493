#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "conelab/geodesic_engine.hpp"
#include "conelab/surface_geometry.hpp"

namespace conelab {

enum class FocusingVerdict { kFocalPointPredicted, kInconclusive };

// Convergence normalization: the surface module returns the full trace
// k = g(H, nu) (round r-sphere: k_- = 2/r). The focusing machinery works with
// the per-transverse-direction convergence c = k/(n-2), which makes the
// admissibility threshold b > 1/c the sharp flat-space focusing scale
// (ingoing spheres focus exactly at t = r = 1/c).
struct FocusingReport {
    int geodesic_id = 0;
    double b = 0.0;          // affine horizon
    double c = 0.0;          // per-direction convergence k_S(nu) / (n-2)
    double lhs = 0.0;        // int (n-2) f'^2 - f^2 Ric(g', g')
    double rhs = 0.0;        // (n-2) c = k_S(nu)
    double delta_threshold = 0.0;
    double min_ric = 0.0;    // min sampled Ric(g', g') along the geodesic
    FocusingVerdict verdict = FocusingVerdict::kInconclusive;
    double nu_multiplier = 1.0;  // recorded scale of nu vs the stored K_-
};

// delta(b, c, n) = 3/b^2 (n-2)(bc - 1); requires b > 1/c, c > 0, n >= 3.
double delta_threshold(double b, double c, int n);

// Profile f on [0, b] with f(0) = 1; default f(t) = 1 - t/b.
using FocusingProfile = std::function<double(double t, double b)>;
using FocusingProfileDeriv = std::function<double(double t, double b)>;

struct FocusingOptions {
    FocusingProfile f;         // empty -> 1 - t/b
    FocusingProfileDeriv fp;   // empty -> -1/b
    double ric_fd_step = 1e-3;
    int refine_near_end = 4;   // extra Simpson refinement near t = b
};

// Evaluates the focusing inequality along a null geodesic from S:
// verdict = kFocalPointPredicted iff lhs <= rhs. k_start is the raw trace
// convergence g(H, nu) at the start point; ric_field supplies the curvature
// (the trajectory's own field, or a regularized member when the base metric
// is only C^1).
FocusingReport focusing_functional(const MetricField& ric_field,
                                   const CurveTrajectory& geodesic, double k_start,
                                   double b, const FocusingOptions& opts = {});

// Smallest b in b_grid whose verdict is kFocalPointPredicted; nullopt when no
// grid entry predicts (sentinel +inf in reports). Grid entries beyond the
// trajectory's extent are skipped.
std::optional<double> maximizing_bound(const MetricField& ric_field,
                                       const CurveTrajectory& geodesic, double k_start,
                                       const std::vector<double>& b_grid,
                                       const FocusingOptions& opts = {});

void write_focusing_csv(const std::string& path, const std::vector<FocusingReport>& reports,
                        const std::string& scenario_id, const std::string& version);

void write_focusing_json(const std::string& path, const FocusingReport& rep,
                         const std::string& scenario_id, const std::string& version);

}  // namespace conelab
