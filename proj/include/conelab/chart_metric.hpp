#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "conelab/linalg.hpp"

namespace conelab {

// Axis-aligned chart box, optionally with a spherical cut-out around a
// coordinate-singular core (the cut-out applies to the spatial axes 1..n-1).
struct Box {
    VecN lo, hi;
    double exclusion_radius = 0.0;

    int dim() const { return lo.n; }

    bool contains(const VecN& x, double margin = 0.0) const {
        for (int i = 0; i < lo.n; ++i)
            if (x[i] < lo[i] + margin || x[i] > hi[i] - margin) return false;
        if (exclusion_radius > 0.0) {
            double r2 = 0;
            for (int i = 1; i < lo.n; ++i) r2 += x[i] * x[i];
            if (r2 < (exclusion_radius + margin) * (exclusion_radius + margin)) return false;
        }
        return true;
    }

    double shortest_edge() const {
        double e = hi[0] - lo[0];
        for (int i = 1; i < lo.n; ++i) e = std::min(e, hi[i] - lo[i]);
        return e;
    }
};

enum class Regularity { kSmooth, kC11, kC1 };

enum class CausalCharacter { kTimelike, kNull, kSpacelike };

const char* to_string(CausalCharacter c);
const char* to_string(Regularity r);

struct TangentVector {
    VecN base_point;
    VecN components;
};

// Constant positive definite background metric used for norms and distances.
struct BackgroundMetric {
    MatN h;

    static BackgroundMetric euclidean(int n) { return BackgroundMetric{identity_mat(n)}; }

    double norm(const VecN& v) const { return std::sqrt(quad_form(h, v, v)); }
    double dist(const VecN& x, const VecN& y) const {
        VecN d = x;
        d -= y;
        return norm(d);
    }
};

// A Lorentzian metric on a chart box. Components (and optionally their first
// derivatives) are supplied as closures; fields are immutable after
// construction and safe to share across threads.
struct MetricField {
    int dim = 4;
    Box domain;
    Regularity regularity = Regularity::kSmooth;
    std::string name;

    std::function<void(const VecN&, MatN&)> components;
    // d_k g_ij; empty -> central finite differences.
    std::function<void(const VecN&, Deriv3&)> derivs;
    // Designated future timelike field; empty -> coordinate e_0.
    std::function<void(const VecN&, VecN&)> future_field;

    // Bit i set: components vary along axis i. Used to skip constant axes in
    // finite differences and convolution.
    uint32_t dependence_mask = 0xffffffffu;
    // Axis -> coordinate values where the components are only C^1 across the
    // hyperplane x_axis = value.
    std::vector<std::vector<double>> kink_planes;
    double fd_scale = 1.0;

    bool constant() const { return dependence_mask == 0; }
    bool depends_on(int axis) const { return (dependence_mask >> axis) & 1u; }

    VecN future_at(const VecN& x) const {
        VecN u(dim);
        if (future_field) {
            future_field(x, u);
        } else {
            u = basis_vec(dim, 0);
        }
        return u;
    }
};

// 4th-order central finite-difference step for first derivatives of g.
double fd_step(const MetricField& field);

// g_ij(x). Throws DomainError outside the chart, InvalidMetric on a
// signature violation.
MatN eval_metric(const MetricField& field, const VecN& x);

// As eval_metric but without the symmetry/signature validation (hot paths).
MatN eval_metric_raw(const MetricField& field, const VecN& x);

// d_k g_ij at x, analytic when the field carries a closure, otherwise
// 4th-order central differences along the dependent axes.
Deriv3 metric_first_derivs(const MetricField& field, const VecN& x);

// Signature check: exactly one negative eigenvalue.
bool has_lorentzian_signature(const MatN& g, double tol = 1e-10);

CausalCharacter causal_character(const MetricField& field, const TangentVector& v,
                                 double tol = 1e-9);

bool is_future_directed(const MetricField& field, const TangentVector& v);

// Deterministic unit directions on the h-sphere of the spatial axes
// (axis 0 excluded). Supports spatial dimension 2 and 3; higher dimensions
// fall back to a low-discrepancy lattice.
std::vector<VecN> sphere_directions(int dim, int count, const BackgroundMetric& h);

// Solve g(tau e_0 + u, tau e_0 + u) = 0 for the future root tau > 0.
// u is a spatial direction (u[0] == 0). Throws InvalidMetric if the chart
// direction e_0 is not timelike for g at this point.
double null_time_component(const MatN& g, const VecN& u);

// General form: X = tau * fut + u on the null cone, fut timelike. Works on
// charts whose coordinate time direction tips over (horizon interiors).
VecN null_cone_vector(const MatN& g, const VecN& fut, const VecN& u);

enum class ConeOrder { kNarrower, kNotNarrower };

// Samples g1-null vectors at x and reports kNarrower iff every one of them is
// g2-timelike.
ConeOrder cone_compare(const MetricField& g1, const MetricField& g2, const VecN& x,
                       int samples, const BackgroundMetric& h);

// ---------------------------------------------------------------------------
// Built-in metrics.

MetricField make_minkowski(int dim = 4, double box_half_width = 8.0);

// -dt^2 + (1 + |x1|^{3/2}) dx1^2 + dx2^2 + ... ; C^1 but not C^{1,1} at x1=0.
MetricField make_c1_model(double box_half_width = 1.5);

// -dt^2 + (1 + x1|x1|) dx1^2 + ... ; C^{1,1} but not C^2 at x1=0.
MetricField make_c11_model(double box_half_width = 1.5);

// Schwarzschild in Schwarzschild coordinates (t, r, theta, phi) on an
// exterior box.
MetricField make_schwarzschild_spherical(double mass, double r_min, double r_max);

// Schwarzschild in Cartesian-like coordinates (t, x, y, z), exterior chart.
MetricField make_schwarzschild_cartesian(double mass, double box_half_width,
                                         double exclusion_radius);

// Painleve-Gullstrand slicing of Schwarzschild, Cartesian spatial axes;
// regular across the horizon, singular core cut out.
MetricField make_painleve_gullstrand(double mass, double box_half_width,
                                     double exclusion_radius);

// -dt^2 + dtheta^2 + sin^2(theta) dphi^2 + dz^2 (unit 2-sphere block).
MetricField make_sphere_block();

// -dt^2 + dchi^2 + sin^2(chi)(dtheta^2 + sin^2(theta) dphi^2): spatial S^3.
MetricField make_s3_block();

// -dt^2 + e^{2t^2}(dx^2+dy^2+dz^2): violates the null energy condition
// (Ric(X,X) < 0 on radial null X).
MetricField make_nec_violator(double box_half_width = 0.8);

// Construct a field from per-component closures with analytic derivatives.
MetricField make_from_closures(int dim, Box domain, Regularity reg, std::string name,
                               std::function<void(const VecN&, MatN&)> comps,
                               std::function<void(const VecN&, Deriv3&)> derivs,
                               uint32_t dependence_mask);

}  // namespace conelab
