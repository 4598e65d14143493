#pragma once

#include <optional>
#include <string>
#include <vector>

#include "conelab/chart_metric.hpp"
#include "conelab/curvature.hpp"

namespace conelab {

struct CurveTrajectory {
    std::vector<double> params;
    std::vector<VecN> points;
    std::vector<VecN> velocities;
    std::vector<CausalCharacter> segment_character;  // size = points - 1
    double length = 0.0;
    bool exited_domain = false;
    double affine_drift = 0.0;  // max |g(v,v) - g(v0,v0)| along the curve

    int size() const { return static_cast<int>(points.size()); }
    double t_begin() const { return params.front(); }
    double t_end() const { return params.back(); }

    // Cubic Hermite interpolation of position/velocity between stored samples.
    VecN point_at(double t) const;
    VecN velocity_at(double t) const;
};

struct IntegratorOptions {
    double abs_tol = 1e-9;
    double rel_tol = 1e-9;
    double affine_drift_tol = 1e-7;
    int max_steps = 200000;
    int drift_retries = 2;
};

// Adaptive RK5(4) integration of gamma'' = -Gamma(gamma', gamma'). Stops at
// the chart boundary with exited_domain set.
CurveTrajectory integrate_geodesic(const MetricField& field, const VecN& x0, const VecN& v0,
                                   double t0, double t1,
                                   const IntegratorOptions& opts = {});

// Solves W' + Gamma(gamma', W) = 0 along the stored curve; returns W at every
// stored parameter value.
std::vector<VecN> parallel_transport(const MetricField& field, const CurveTrajectory& curve,
                                     const VecN& w0);

// Integral of sqrt(-g(c', c')) over the curve. Radicands in [-tol, 0) clamp
// to zero; a spacelike segment is an error.
double lorentzian_length(const MetricField& field, const CurveTrajectory& curve,
                         double tol = 1e-9);

// Straight-segment polygon length between vertices (uniform parameter).
double polygon_length(const MetricField& field, const std::vector<VecN>& vertices,
                      double causal_tol = 1e-9);

struct BrokenGeodesic {
    CurveTrajectory left, right;  // right starts where left ends
    VecN v;                       // limit velocity from the left at the break
    VecN w;                       // limit velocity from the right
};

struct VariationRow {
    double s = 0.0;
    double length = 0.0;
    bool timelike = false;
};

struct VariationReport {
    std::vector<VariationRow> rows;  // includes s = 0
    double base_length = 0.0;
    bool lengthened = false;         // L(c_s) > L(c) at the smallest s > 0
    double dL_ds_estimate = 0.0;
    double reparam_alpha = 1.0;      // applied rescaling of w
};

// Broken-geodesic variation: y = w - v transported along both segments, hat
// profile vanishing at the endpoints, curve flowed by coordinate translation.
VariationReport break_variation(const MetricField& field, const BrokenGeodesic& broken,
                                const std::vector<double>& s_list);

struct MaximizerOptions {
    int outer_iterations = 8;
    double penalty_start = 10.0;
    int sweeps_per_outer = 6;
    double refine_tol = 1e-11;
};

struct MaximizerResult {
    bool feasible = false;
    CurveTrajectory path;           // refined polygon
    std::vector<VecN> vertices;
    double length = 0.0;
    double residual = 0.0;          // first-order geodesic defect of the polygon
};

// Discrete search for the longest causal polygon from p to q, followed by a
// discrete-geodesic refinement of the vertices.
MaximizerResult maximizer_search(const MetricField& field, const VecN& p, const VecN& q,
                                 int n_segments, const BackgroundMetric& h,
                                 const MaximizerOptions& opts = {});

// Max over vertices of |(x_{k+1}-2x_k+x_{k-1})/dt^2 + Gamma(x_k)(v_k,v_k)|_h
// with forward-difference velocities (a first-order defect measure).
double polygon_geodesic_residual(const MetricField& field, const std::vector<VecN>& vertices,
                                 double dt, const BackgroundMetric& h);

struct ShootResult {
    bool found = false;
    CurveTrajectory path;
    VecN initial_velocity;
    double miss = 0.0;
};

// Multiple-start shooting: find v with gamma(1; p, v) = q to tolerance.
ShootResult shoot_connect(const MetricField& field, const VecN& p, const VecN& q, double tol,
                          const BackgroundMetric& h, int max_starts = 8);

struct FunnelRow {
    double sigma = 0.0;
    double divergence = 0.0;
    double ratio = 0.0;  // divergence / sigma
};

struct FunnelReport {
    std::vector<FunnelRow> rows;
    bool flagged = false;  // heuristic: ratio grew >= 10x across the sweep
    std::string note;
};

// Integrates bundles of geodesics with perturbed initial data and distinct
// integrator tolerances; reports endpoint divergence against perturbation
// scale. The flag is a heuristic, never a certificate.
FunnelReport branching_probe(const MetricField& field, const VecN& x0, const VecN& v0,
                             const std::vector<double>& perturbation_scales,
                             const BackgroundMetric& h);

double hausdorff_distance(const std::vector<VecN>& a, const std::vector<VecN>& b,
                          const BackgroundMetric& h);

void write_trajectory_csv(const std::string& path, const CurveTrajectory& curve,
                          const std::string& scenario_id, const std::string& version);

void write_funnel_csv(const std::string& path, const FunnelReport& rep,
                      const std::string& scenario_id, const std::string& version);

}  // namespace conelab
