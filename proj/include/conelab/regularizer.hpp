#pragma once

#include <string>
#include <vector>

#include "conelab/chart_metric.hpp"

namespace conelab {

// Normalized bump kernel C (1 - |y|^2)^p on the unit ball of the d axes a
// field actually depends on. Convolving a field that is constant along the
// remaining axes with the full n-dimensional mollifier (1-|x|^2)^4 is the
// same as convolving along the dependent axes with the marginal kernel,
// which has exponent p = 4 + (n - d)/2.
struct MollifierKernel {
    int active_axes = 1;
    double exponent = 4.0;
    double norm_const = 1.0;

    static MollifierKernel marginal(int full_dim, int active_axes);
    double value(double r2) const;  // r2 = |y|^2, unit-scaled
    // quadrature check of unit mass (radial Gauss-Legendre)
    double mass_quadrature(int order = 40) const;
};

struct MollifyOptions {
    int quad_order = 10;
    double kink_spacing_divisor = 8.0;  // spacing eps/8 across kink axes
    int smooth_axis_nodes = 49;         // nodes per smooth dependent axis
    size_t node_budget = 2500000;
};

// g * rho_eps as a smooth spline-backed field on the eps-shrunk chart.
MetricField mollify(const MetricField& base, double eps, const MollifyOptions& opts = {});

struct RegularizationFamily {
    MetricField base;
    BackgroundMetric h;
    std::vector<double> eps_list;  // strictly decreasing, positive
    double c_corr = 0.0;
    std::vector<MetricField> mollified;  // one per eps
    std::vector<VecN> verification_points;
};

// Builds the mollified family and calibrates the cone-correction coefficient
// by doubling until g_check < g < g_hat nesting holds at every verification
// point for every eps. Throws CalibrationError after 20 doublings.
RegularizationFamily build_regularization_family(const MetricField& base,
                                                 std::vector<double> eps_list,
                                                 const BackgroundMetric& h,
                                                 int verify_points = 200,
                                                 int cone_samples = 128,
                                                 uint64_t seed = 1234,
                                                 const MollifyOptions& mopts = {});

// g_check = g*rho_eps + lambda(eps) u_flat (x) u_flat, lambda = c_corr * eps.
MetricField narrow_member(const RegularizationFamily& family, double eps);
// g_hat = g*rho_eps - lambda(eps) u_flat (x) u_flat.
MetricField widen_member(const RegularizationFamily& family, double eps);

struct ConvergenceRow {
    double eps = 0;
    double sup_narrow_minus_moll = 0;  // lambda * sup |u_flat u_flat|
    double sup_widen_minus_moll = 0;
    double sup_moll_minus_base = 0;
    double sup_dmoll_minus_dbase = 0;
    double sup_narrow_minus_base = 0;
    double sup_dnarrow_minus_dbase = 0;
    double ratio_narrow = 0;  // sup_narrow_minus_moll / eps
    double ratio_widen = 0;
};

struct ConvergenceReport {
    std::vector<ConvergenceRow> rows;
    double c_K = 0.0;          // measured bound for |g_check - g*rho|/eps
    // spline-representation floor of the derivative error on this grid
    // (smooth fields only; the kinked axes refine with eps by construction)
    double c1_floor = 0.0;
    bool ratios_bounded = false;
    bool c0_converges = false;     // sup|g_check - g| final < first / 4
    bool c1_monotone = false;      // derivative sup-error nonincreasing down to
                                   // the representation floor
    bool pass = false;
};

ConvergenceReport convergence_report(const RegularizationFamily& family, const Box& K,
                                     int samples_per_axis = 800);

void write_convergence_csv(const std::string& path, const ConvergenceReport& rep,
                           const std::string& scenario_id, const std::string& version);

}  // namespace conelab
