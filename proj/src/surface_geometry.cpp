#include "conelab/surface_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "conelab/curvature.hpp"
#include "conelab/errors.hpp"

namespace conelab {

namespace {

void check_on_surface(const HypersurfaceData& slice, const SurfaceLevelSet& surf,
                      const VecN& x) {
    if (std::abs(surf.sigma(x)) > 1e-8)
        throw InvalidInput("point not on the level set (|sigma| > 1e-8)");
    if (std::abs(x[0] - slice.tau(x)) > 1e-8)
        throw InvalidInput("point not on the slice (|t - tau| > 1e-8)");
}

// Raise a covector with g^{-1}.
VecN raise(const MatN& ginv, const VecN& cov) { return matvec(ginv, cov); }

}  // namespace

SurfaceNormals build_normals(const MetricField& field, const HypersurfaceData& slice,
                             const SurfaceLevelSet& surf, const VecN& x) {
    check_on_surface(slice, surf, x);
    const int n = field.dim;
    MatN g = eval_metric_raw(field, x);
    MatN ginv = inverse(g);

    // U from dF = dt - dtau
    VecN dF(n);
    dF[0] = 1.0;
    VecN gt = slice.grad_tau(x);
    for (int i = 1; i < n; ++i) dF[i] = -gt[i];
    VecN U = raise(ginv, dF);
    const double uu = quad_form(g, U, U);
    if (uu >= 0) throw SingularSurfaceError("slice normal is not timelike");
    U *= 1.0 / std::sqrt(-uu);
    VecN fut = field.future_at(x);
    if (quad_form(g, U, fut) > 0) U *= -1.0;

    // N from dsigma projected tangent to the slice
    VecN ds = surf.grad_sigma(x);
    double dsn = 0;
    for (int i = 0; i < n; ++i) dsn += ds[i] * ds[i];
    if (dsn < 1e-20) throw SingularSurfaceError("degenerate level-set gradient");
    VecN W = raise(ginv, ds);
    VecN N = W + quad_form(g, W, U) * U;
    const double nn = quad_form(g, N, N);
    if (nn <= 1e-20) throw SingularSurfaceError("degenerate surface normal");
    N *= 1.0 / std::sqrt(nn);
    // orient toward sigma > 0
    double dirderiv = 0;
    for (int i = 0; i < n; ++i) dirderiv += ds[i] * N[i];
    if (dirderiv < 0) N *= -1.0;

    SurfaceNormals out;
    out.U = U;
    out.N_plus = N;
    out.N_minus = N;
    out.N_minus *= -1.0;
    out.K_plus = U + out.N_plus;
    out.K_minus = U + out.N_minus;
    return out;
}

namespace {

// Frame construction with a caller-fixed pivot so that finite differences of
// the frame along S stay smooth (the pivot must not flip between samples).
std::vector<VecN> tangent_frame_pivoted(const MetricField& field,
                                        const HypersurfaceData& slice,
                                        const SurfaceLevelSet& surf, const VecN& x,
                                        int piv) {
    const int n = field.dim;
    MatN g = eval_metric_raw(field, x);
    VecN ds = surf.grad_sigma(x);
    VecN gt = slice.grad_tau(x);
    if (std::abs(ds[piv]) < 1e-14)
        throw SingularSurfaceError("tangent frame: degenerate gradient");

    std::vector<VecN> frame;
    for (int a = 1; a < n; ++a) {
        if (a == piv) continue;
        VecN v(n);
        v[a] = 1.0;
        v[piv] = -ds[a] / ds[piv];
        // lift into the slice
        v[0] = 0.0;
        for (int i = 1; i < n; ++i) v[0] += gt[i] * v[i];
        frame.push_back(v);
    }
    // Gram-Schmidt in g (frame vectors are spacelike)
    for (size_t i = 0; i < frame.size(); ++i) {
        for (size_t j = 0; j < i; ++j)
            frame[i] -= quad_form(g, frame[i], frame[j]) * frame[j];
        const double q = quad_form(g, frame[i], frame[i]);
        if (q <= 1e-20) throw SingularSurfaceError("tangent frame: near-degenerate");
        frame[i] *= 1.0 / std::sqrt(q);
    }
    return frame;
}

int frame_pivot(const SurfaceLevelSet& surf, const VecN& x, int n) {
    VecN ds = surf.grad_sigma(x);
    int piv = 1;
    for (int a = 2; a < n; ++a)
        if (std::abs(ds[a]) > std::abs(ds[piv])) piv = a;
    return piv;
}

}  // namespace

std::vector<VecN> surface_tangent_frame(const MetricField& field,
                                        const HypersurfaceData& slice,
                                        const SurfaceLevelSet& surf, const VecN& x) {
    return tangent_frame_pivoted(field, slice, surf, x,
                                 frame_pivot(surf, x, field.dim));
}

VecN project_to_surface(const HypersurfaceData& slice, const SurfaceLevelSet& surf, VecN x,
                        int iterations) {
    for (int it = 0; it < iterations; ++it) {
        const double s = surf.sigma(x);
        if (std::abs(s) < 1e-13) break;
        VecN gs = surf.grad_sigma(x);
        double g2 = 0;
        for (int i = 1; i < x.n; ++i) g2 += gs[i] * gs[i];
        if (g2 < 1e-20) throw SingularSurfaceError("projection: degenerate gradient");
        for (int i = 1; i < x.n; ++i) x[i] -= s * gs[i] / g2;
    }
    x[0] = slice.tau(x);
    return x;
}

VecN mean_curvature(const MetricField& field, const HypersurfaceData& slice,
                    const SurfaceLevelSet& surf, const VecN& x, double fd_step) {
    check_on_surface(slice, surf, x);
    const int n = field.dim;
    MatN g = eval_metric_raw(field, x);
    SurfaceNormals nor = build_normals(field, slice, surf, x);
    const int piv = frame_pivot(surf, x, n);
    std::vector<VecN> frame = tangent_frame_pivoted(field, slice, surf, x, piv);
    ChristoffelAt G = christoffel(field, x);

    VecN H(n);
    for (size_t a = 0; a < frame.size(); ++a) {
        const VecN& e = frame[a];
        // directional derivative of the frame field along e (4th order);
        // the pivot stays frozen so the frame family is smooth
        auto frame_at = [&](double s) {
            VecN y = x;
            for (int i = 1; i < n; ++i) y[i] += s * e[i];
            y = project_to_surface(slice, surf, y);
            return tangent_frame_pivoted(field, slice, surf, y, piv)[a];
        };
        VecN ep = frame_at(fd_step), em = frame_at(-fd_step);
        VecN ep2 = frame_at(2 * fd_step), em2 = frame_at(-2 * fd_step);
        VecN dE(n);
        for (int i = 0; i < n; ++i)
            dE[i] = (8.0 * (ep[i] - em[i]) - (ep2[i] - em2[i])) / (12.0 * fd_step);
        // covariant derivative, then the normal projection
        VecN cov = dE;
        for (int k = 0; k < n; ++k) {
            double acc = 0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) acc += G(k, i, j) * e[i] * e[j];
            cov[k] += acc;
        }
        H += (-quad_form(g, cov, nor.U)) * nor.U;
        VecN proj_n = nor.N_plus;
        H += quad_form(g, cov, nor.N_plus) * proj_n;
    }
    return H;
}

std::pair<double, double> convergence_pair(const MetricField& field,
                                           const HypersurfaceData& slice,
                                           const SurfaceLevelSet& surf, const VecN& x) {
    MatN g = eval_metric_raw(field, x);
    SurfaceNormals nor = build_normals(field, slice, surf, x);
    VecN H = mean_curvature(field, slice, surf, x);
    return {quad_form(g, H, nor.K_plus), quad_form(g, H, nor.K_minus)};
}

std::vector<VecN> sample_surface(const MetricField& field, const HypersurfaceData& slice,
                                 const SurfaceLevelSet& surf, int n_samples,
                                 const BackgroundMetric& h, double ray_max) {
    const int n = field.dim;
    if (ray_max <= 0) {
        ray_max = 0;
        for (int a = 1; a < n; ++a)
            ray_max = std::max(ray_max, field.domain.hi[a] - field.domain.lo[a]);
    }
    std::vector<VecN> dirs = sphere_directions(n, n_samples, h);
    std::vector<VecN> out;
    for (const VecN& d : dirs) {
        // bracket sigma = 0 along the ray from the center
        const double r_lo = std::max(1e-6, field.domain.exclusion_radius * 1.5);
        double lo = r_lo, hi = 0;
        auto at = [&](double r) {
            VecN y = surf.ray_center;
            for (int i = 1; i < n; ++i) y[i] += r * d[i];
            return y;
        };
        const double s_lo = surf.sigma(at(lo));
        bool found = false;
        for (double r = r_lo * 2; r <= ray_max; r *= 1.25) {
            if (surf.sigma(at(r)) * s_lo < 0) {
                hi = r;
                found = true;
                break;
            }
            lo = r;
        }
        if (!found) continue;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (surf.sigma(at(mid)) * s_lo < 0)
                hi = mid;
            else
                lo = mid;
        }
        VecN p = at(0.5 * (lo + hi));
        p[0] = slice.tau(p);
        if (field.domain.contains(p)) out.push_back(p);
    }
    return out;
}

TrappedReport inner_trapped_test(const MetricField& field, const HypersurfaceData& slice,
                                 const SurfaceLevelSet& surf, int n_samples,
                                 const BackgroundMetric& h) {
    std::vector<VecN> pts = sample_surface(field, slice, surf, n_samples, h);
    if (pts.empty()) throw SingularSurfaceError("inner_trapped_test: no surface samples");
    TrappedReport rep;
    rep.samples = static_cast<int>(pts.size());
    rep.min_k_minus = std::numeric_limits<double>::infinity();
    for (const VecN& p : pts) {
        const auto [kp, km] = convergence_pair(field, slice, surf, p);
        (void)kp;
        if (km < rep.min_k_minus) {
            rep.min_k_minus = km;
            rep.witness = p;
        }
    }
    // strictly positive beyond FD noise
    rep.trapped = rep.min_k_minus > 1e-9;
    return rep;
}

void write_trapped_json(const std::string& path, const TrappedReport& rep,
                        const std::string& scenario_id, const std::string& version) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw ConfigError("cannot open " + path);
    std::fprintf(f, "{\n  \"scenario\": \"%s\",\n  \"version\": \"%s\",\n",
                 scenario_id.c_str(), version.c_str());
    std::fprintf(f, "  \"trapped\": %s,\n  \"min_k_minus\": %.12g,\n",
                 rep.trapped ? "true" : "false", rep.min_k_minus);
    std::fprintf(f, "  \"samples\": %d,\n  \"witness\": [", rep.samples);
    for (int i = 0; i < rep.witness.n; ++i)
        std::fprintf(f, "%s%.12g", i ? ", " : "", rep.witness[i]);
    std::fprintf(f, "]\n}\n");
    std::fclose(f);
}

}  // namespace conelab
