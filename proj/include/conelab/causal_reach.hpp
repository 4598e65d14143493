#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "conelab/geodesic_engine.hpp"
#include "conelab/regularizer.hpp"
#include "conelab/surface_geometry.hpp"

namespace conelab {

// Uniform spacetime grid; axis 0 is coordinate time. Metrics must be static
// in the chart time for the arrival-time reduction to apply.
struct CausalGridSpec {
    int dim = 4;
    VecN lo;       // cell-center coordinates of cell (0,...,0)
    VecN spacing;
    std::array<int, kMaxDim> counts{};

    int spatial_cells() const {
        int total = 1;
        for (int a = 1; a < dim; ++a) total *= counts[static_cast<size_t>(a)];
        return total;
    }
    size_t total_cells() const {
        return static_cast<size_t>(counts[0]) * static_cast<size_t>(spatial_cells());
    }
};

struct EikonalOptions {
    int seed_radius_cells = 3;
    // Gauss-Seidel fixed-point sweeps after marching; heavily tilted cones
    // (shift terms) want 1-2, symmetric cones none.
    int post_sweeps = 0;
    double sweep_tol = 1e-9;
};

// First coordinate time at which each spatial cell is causally reachable from
// the sources (+inf where unreachable). Sources carry their own start times
// in slot 0.
std::vector<double> solve_arrival(const MetricField& field, const std::vector<VecN>& sources,
                                  const CausalGridSpec& spec, const BackgroundMetric& h,
                                  const EikonalOptions& opts = {});

struct CausalGrid {
    CausalGridSpec spec;
    std::vector<double> arrival;          // spatial field
    std::vector<uint8_t> J, I, E;         // spacetime masks, t-major

    size_t spatial_index(const std::array<int, kMaxDim>& ix) const;
    std::optional<size_t> spatial_cell_of(const VecN& x) const;
    size_t mask_index(int it, size_t spatial) const {
        return static_cast<size_t>(it) * static_cast<size_t>(spec.spatial_cells()) + spatial;
    }
    // Multilinear interpolation of the arrival field at a chart point
    // (+inf if any stencil cell is unreachable).
    double arrival_at(const VecN& x) const;
    bool in_I(const VecN& x) const;  // continuous test t > T(x) + margin
    bool in_J(const VecN& x) const;
};

// Fixed-point reachability masks: J = {t >= T - dt/2}, I = {t >= T + dt},
// E = J \ I.
CausalGrid future_sets(const MetricField& field, const std::vector<VecN>& sources,
                       const CausalGridSpec& spec, const BackgroundMetric& h,
                       const EikonalOptions& opts = {});

void write_masks(const std::string& path_prefix, const CausalGrid& grid,
                 const std::string& scenario_id, const std::string& version);

enum class GeneratorDirection { kKMinus, kKPlus };

struct GeneratorBundle {
    std::vector<CurveTrajectory> generators;  // truncated at E-exit or domain exit
    std::vector<double> exit_params;          // affine truncation parameter
    std::vector<int> exit_reason;             // 0 = entered I, 1 = domain exit, 2 = ran out
    std::vector<VecN> start_points;
    std::vector<VecN> start_velocities;
    std::vector<double> start_convergence;    // k(nu) at the start point
};

// Null geodesics from S with initial velocity K_- (or K_+), truncated at the
// first entry into I^+(S) or at the chart boundary: a discrete inward null
// horizon candidate.
GeneratorBundle boundary_generators(const MetricField& field, const CausalGrid& grid,
                                    const HypersurfaceData& slice,
                                    const SurfaceLevelSet& surf, GeneratorDirection dir,
                                    int n_samples, const BackgroundMetric& h,
                                    double t_max = 4.0);

struct EpsCompareRow {
    double eps = 0.0;
    double sup_distance = 0.0;     // max over generators of sup_{t<=1-delta} d_h
    bool generator_in_E = true;    // regularized generator stayed in its own E-set
    bool truncated = false;        // comparison window cut by a domain exit
};

struct EpsCompareReport {
    std::vector<EpsCompareRow> rows;
    double delta = 0.0;
    bool distances_decrease = false;  // final <= first / 4
};

// For each eps: rebuild the surface normals under the narrowed metric, shoot
// the corresponding generator from the same points of S, and measure the
// sup-distance to the base generator on [0, 1-delta].
EpsCompareReport eps_maximizer_compare(const RegularizationFamily& family,
                                       const HypersurfaceData& slice,
                                       const SurfaceLevelSet& surf,
                                       const GeneratorBundle& base, double delta,
                                       const CausalGridSpec& spec,
                                       const BackgroundMetric& h);

struct CompactnessReport {
    bool pass = false;
    bool inconclusive = false;     // bundle left through the outer box
    double lambda_max = 0.0;       // 2 / c_min (or the overridden range)
    VecN bound_lo, bound_hi;       // bounding box of the swept set F
    int covered = 0, total = 0;    // horizon samples covered by pi(F)
    std::vector<VecN> violations;  // horizon samples outside pi(F)
    std::vector<double> violation_multipliers;  // would-be initial multipliers
};

// Sweeps the bundle {lambda K_-(p) : 0 <= lambda <= lambda_max} over S on
// affine [0,1], checks the swept set F is contained in a bounded sub-box, and
// verifies the discrete horizon samples lie in pi(F). lambda_max defaults to
// 2 / c_min; the controlled-failure mode passes 1 / c_min.
CompactnessReport compactness_probe(const MetricField& field, const HypersurfaceData& slice,
                                    const SurfaceLevelSet& surf, double c_min,
                                    int lambda_steps, const GeneratorBundle& horizon,
                                    const CausalGridSpec& spec, const BackgroundMetric& h,
                                    double lambda_max_override = 0.0);

void write_eps_compare_csv(const std::string& path, const EpsCompareReport& rep,
                           const std::string& scenario_id, const std::string& version);

void write_compactness_json(const std::string& path, const CompactnessReport& rep,
                            const std::string& scenario_id, const std::string& version);

}  // namespace conelab
