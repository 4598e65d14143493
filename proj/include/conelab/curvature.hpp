#pragma once

#include <functional>
#include <string>
#include <vector>

#include "conelab/chart_metric.hpp"

namespace conelab {

struct ChristoffelAt {
    VecN point;
    int n = 0;
    std::array<double, kMaxDim * kMaxDim * kMaxDim> g{};

    explicit ChristoffelAt(int dim) : n(dim) {}
    // Gamma^k_ij
    double& operator()(int k, int i, int j) {
        return g[static_cast<size_t>((k * n + i) * n + j)];
    }
    double operator()(int k, int i, int j) const {
        return g[static_cast<size_t>((k * n + i) * n + j)];
    }
};

struct RicciAt {
    VecN point;
    MatN ric;
};

struct RiemannAt {
    VecN point;
    int n = 0;
    std::vector<double> r;  // Riem^m_ijk

    explicit RiemannAt(int dim) : n(dim), r(static_cast<size_t>(dim * dim * dim * dim), 0.0) {}
    double& operator()(int m, int i, int j, int k) {
        return r[static_cast<size_t>(((m * n + i) * n + j) * n + k)];
    }
    double operator()(int m, int i, int j, int k) const {
        return r[static_cast<size_t>(((m * n + i) * n + j) * n + k)];
    }
};

// Gamma^k_ij = 1/2 g^{kl} (d_i g_lj + d_j g_li - d_l g_ij)
ChristoffelAt christoffel(const MetricField& field, const VecN& x);

// Riem^m_ijk = d_j Gamma^m_ik - d_k Gamma^m_ij + Gamma^m_js Gamma^s_ik
//              - Gamma^m_ks Gamma^s_ij.
// Requires a smooth (or regularized) field; throws RegularityError on a raw
// C^1 or C^{1,1} field.
RiemannAt riemann(const MetricField& field, const VecN& x, double fd_step = 1e-3);

// Ric_ij = d_m Gamma^m_ij - d_j Gamma^m_im + Gamma^m_ij Gamma^k_km
//          - Gamma^m_ik Gamma^k_jm
RicciAt ricci(const MetricField& field, const VecN& x, double fd_step = 1e-3);

// Smooth compactly supported volume density (1 - |x-c|^2/R^2)^4.
struct TestBump {
    VecN center;
    double radius = 1.0;

    double value(const VecN& x) const;
    VecN gradient(const VecN& x) const;
    // integral over the chart of the unnormalized profile (closed form)
    double mass() const;
};

// Smooth local vector field with an analytic Jacobian, J(i,j) = d_j X^i.
struct SmoothVectorField {
    std::function<void(const VecN&, VecN&)> value;
    std::function<void(const VecN&, MatN&)> jacobian;
};

// Quadrature approximation of <Ric(X,X), mu>. The d Gamma terms are moved
// onto mu X X by parts, so only first derivatives of g are ever
// differenced numerically. Valid on raw C^1 fields.
double distributional_ricci_pairing(const MetricField& field, const SmoothVectorField& X,
                                    const TestBump& mu, int quad_order = 12);

// Direct quadrature of pointwise Ric(X,X) against mu; smooth fields only.
double pointwise_ricci_quadrature(const MetricField& field, const SmoothVectorField& X,
                                  const TestBump& mu, int quad_order = 12,
                                  double fd_step = 1e-3);

struct NecSample {
    VecN point;
    VecN vector;
    double ric_xx = 0.0;
};

struct NecReport {
    double eps = 0.0;       // regularization scale of the checked field (0 = n/a)
    double delta = 0.0;
    double min_value = 0.0;
    bool pass = false;
    NecSample witness;      // argmin sample
    int num_samples = 0;
};

// Samples field-null vectors X with c1 <= |X|_h <= c2 over a grid on K and
// reports min Ric(X,X) and whether it exceeds -delta.
NecReport nec_surrogate_check(const MetricField& field_eps, const Box& K, double c1,
                              double c2, double delta, const BackgroundMetric& h,
                              int axis_samples = 7, int directions = 26,
                              double fd_step = 1e-3);

void write_nec_csv(const std::string& path, const std::vector<NecReport>& reports,
                   const std::string& scenario_id, const std::string& version);

// Gauss-Legendre nodes/weights on [-1, 1]; cached per order.
const std::vector<double>& gl_nodes(int order);
const std::vector<double>& gl_weights(int order);

}  // namespace conelab
