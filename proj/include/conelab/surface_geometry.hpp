#pragma once

#include <functional>
#include <string>
#include <vector>

#include "conelab/chart_metric.hpp"

namespace conelab {

// Spacelike slice embedded as a graph t = tau(x_1..x_{n-1}). Closures take
// the full chart point but read only the spatial components.
struct HypersurfaceData {
    std::function<double(const VecN&)> tau;
    std::function<VecN(const VecN&)> grad_tau;  // spatial gradient, slot 0 zero

    static HypersurfaceData constant_slice(double t0) {
        HypersurfaceData h;
        h.tau = [t0](const VecN&) { return t0; };
        h.grad_tau = [](const VecN& x) { return VecN(x.n); };
        return h;
    }
};

// Codimension-2 surface S = {sigma = 0} inside the slice. sigma is a spatial
// function; ray_center seeds star-shaped sampling.
struct SurfaceLevelSet {
    std::function<double(const VecN&)> sigma;
    std::function<VecN(const VecN&)> grad_sigma;
    VecN ray_center;

    static SurfaceLevelSet sphere(int dim, double radius) {
        SurfaceLevelSet s;
        s.ray_center = VecN(dim);
        s.sigma = [radius](const VecN& x) {
            double r2 = 0;
            for (int i = 1; i < x.n; ++i) r2 += x[i] * x[i];
            return std::sqrt(r2) - radius;
        };
        s.grad_sigma = [](const VecN& x) {
            double r2 = 0;
            for (int i = 1; i < x.n; ++i) r2 += x[i] * x[i];
            const double r = std::sqrt(r2);
            VecN g(x.n);
            for (int i = 1; i < x.n; ++i) g[i] = x[i] / r;
            return g;
        };
        return s;
    }
};

struct SurfaceNormals {
    VecN U;        // future unit normal of the slice
    VecN N_plus;   // unit normal of S in the slice, toward sigma > 0
    VecN N_minus;  // = -N_plus, toward sigma < 0
    VecN K_plus;   // U + N_plus
    VecN K_minus;  // U + N_minus (ingoing null normal)
};

// x must satisfy the level-set and slice equations to 1e-8.
SurfaceNormals build_normals(const MetricField& field, const HypersurfaceData& slice,
                             const SurfaceLevelSet& surf, const VecN& x);

// g-orthonormal tangent frame of S at x (n-2 vectors), deterministic pivot.
std::vector<VecN> surface_tangent_frame(const MetricField& field,
                                        const HypersurfaceData& slice,
                                        const SurfaceLevelSet& surf, const VecN& x);

// Mean curvature vector of S: trace of the second fundamental form over a
// g-orthonormal tangent frame, projected onto span{U, N}.
VecN mean_curvature(const MetricField& field, const HypersurfaceData& slice,
                    const SurfaceLevelSet& surf, const VecN& x, double fd_step = 1e-4);

// (k_plus, k_minus) with k_pm = g(H, K_pm). The Minkowski round sphere has
// k_minus = +2/r (ingoing contraction) and k_plus = -2/r.
std::pair<double, double> convergence_pair(const MetricField& field,
                                           const HypersurfaceData& slice,
                                           const SurfaceLevelSet& surf, const VecN& x);

// Project a chart point onto S (sigma -> 0 along its gradient, then lift to
// the slice).
VecN project_to_surface(const HypersurfaceData& slice, const SurfaceLevelSet& surf,
                        VecN x, int iterations = 5);

// Star-shaped sampling of S from surf.ray_center; rays that never cross the
// level set are skipped.
std::vector<VecN> sample_surface(const MetricField& field, const HypersurfaceData& slice,
                                 const SurfaceLevelSet& surf, int n_samples,
                                 const BackgroundMetric& h, double ray_max = 0.0);

struct TrappedReport {
    bool trapped = false;
    double min_k_minus = 0.0;
    VecN witness;
    int samples = 0;
};

TrappedReport inner_trapped_test(const MetricField& field, const HypersurfaceData& slice,
                                 const SurfaceLevelSet& surf, int n_samples,
                                 const BackgroundMetric& h);

void write_trapped_json(const std::string& path, const TrappedReport& rep,
                        const std::string& scenario_id, const std::string& version);

}  // namespace conelab
