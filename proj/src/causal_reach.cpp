#include "conelab/causal_reach.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>

#include "conelab/errors.hpp"

namespace conelab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Minimal future dt per unit h-length in spatial direction u (unit h-norm):
// smallest s > 0 with g(s e_0 + u, s e_0 + u) <= 0 on the future nappe;
// +inf when the direction is causally blocked.
double directional_slowness(const MatN& g, const VecN& fut, const VecN& u) {
    const int n = g.n;
    const double a = g(0, 0);
    double b = 0, c = 0;
    for (int i = 1; i < n; ++i) b += g(0, i) * u[i];
    for (int i = 1; i < n; ++i)
        for (int j = 1; j < n; ++j) c += g(i, j) * u[i] * u[j];

    auto future_ok = [&](double s) {
        double q = 0;
        q += s * (g(0, 0) * fut[0]);
        for (int i = 1; i < n; ++i) q += s * g(0, i) * fut[i];
        for (int i = 1; i < n; ++i) {
            q += u[i] * g(i, 0) * fut[0];
            for (int j = 1; j < n; ++j) q += u[i] * g(i, j) * fut[j];
        }
        return q < 0;
    };

    if (std::abs(a) < 1e-14) {
        if (b >= 0) return kInf;
        const double s = -c / (2.0 * b);
        return (s > 0 && future_ok(s)) ? s : kInf;
    }
    const double disc = b * b - a * c;
    if (disc < 0) return kInf;
    const double sq = std::sqrt(disc);
    if (a < 0) {
        // one positive root
        const double s = (-b - sq) / a;
        return (s > 0 && future_ok(s)) ? s : kInf;
    }
    // a > 0: causal interval [s_minus, s_plus]; both roots share a sign
    const double s_minus = (-b - sq) / a;
    if (s_minus > 0 && future_ok(s_minus)) return s_minus;
    return kInf;
}

struct Triangle {
    int corners[3];  // indices into the neighbor offset list (third may be -1 in 2D)
    int size;        // 2 or 3
};

struct NeighborTable {
    int sdim = 3;
    std::vector<std::array<int, 3>> offsets;
    std::vector<Triangle> triangles;
    std::vector<std::vector<int>> triangles_of_neighbor;

    static const NeighborTable& get(int sdim);
};

const NeighborTable& NeighborTable::get(int sdim) {
    static NeighborTable t2, t3;
    static bool init = false;
    if (!init) {
        // 2D: 8 neighbors, sectors are adjacent (axis, diagonal) pairs
        t2.sdim = 2;
        for (int i = -1; i <= 1; ++i)
            for (int j = -1; j <= 1; ++j)
                if (i || j) t2.offsets.push_back({i, j, 0});
        auto find2 = [&](int i, int j) {
            for (size_t k = 0; k < t2.offsets.size(); ++k)
                if (t2.offsets[k][0] == i && t2.offsets[k][1] == j)
                    return static_cast<int>(k);
            return -1;
        };
        for (int sx : {-1, 1})
            for (int sy : {-1, 1}) {
                const int ax = find2(sx, 0), ay = find2(0, sy), d = find2(sx, sy);
                t2.triangles.push_back({{ax, d, -1}, 2});
                t2.triangles.push_back({{ay, d, -1}, 2});
            }
        t2.triangles_of_neighbor.resize(t2.offsets.size());
        for (size_t k = 0; k < t2.triangles.size(); ++k)
            for (int c = 0; c < t2.triangles[k].size; ++c)
                t2.triangles_of_neighbor[static_cast<size_t>(t2.triangles[k].corners[c])]
                    .push_back(static_cast<int>(k));

        // 3D: 26 neighbors, each octant triangulated into 6 triangles
        t3.sdim = 3;
        for (int i = -1; i <= 1; ++i)
            for (int j = -1; j <= 1; ++j)
                for (int k = -1; k <= 1; ++k)
                    if (i || j || k) t3.offsets.push_back({i, j, k});
        auto find3 = [&](int i, int j, int k) {
            for (size_t m = 0; m < t3.offsets.size(); ++m)
                if (t3.offsets[m][0] == i && t3.offsets[m][1] == j && t3.offsets[m][2] == k)
                    return static_cast<int>(m);
            return -1;
        };
        for (int sx : {-1, 1})
            for (int sy : {-1, 1})
                for (int sz : {-1, 1}) {
                    const int a1 = find3(sx, 0, 0), a2 = find3(0, sy, 0), a3 = find3(0, 0, sz);
                    const int e12 = find3(sx, sy, 0), e13 = find3(sx, 0, sz),
                              e23 = find3(0, sy, sz);
                    const int c = find3(sx, sy, sz);
                    t3.triangles.push_back({{a1, e12, c}, 3});
                    t3.triangles.push_back({{a2, e12, c}, 3});
                    t3.triangles.push_back({{a1, e13, c}, 3});
                    t3.triangles.push_back({{a3, e13, c}, 3});
                    t3.triangles.push_back({{a2, e23, c}, 3});
                    t3.triangles.push_back({{a3, e23, c}, 3});
                }
        t3.triangles_of_neighbor.resize(t3.offsets.size());
        for (size_t k = 0; k < t3.triangles.size(); ++k)
            for (int c = 0; c < t3.triangles[k].size; ++c)
                t3.triangles_of_neighbor[static_cast<size_t>(t3.triangles[k].corners[c])]
                    .push_back(static_cast<int>(k));
        init = true;
    }
    return sdim == 2 ? t2 : t3;
}

struct Solver {
    const MetricField& field;
    const CausalGridSpec& spec;
    const BackgroundMetric& h;
    const NeighborTable& nbr;
    int sdim;
    std::array<int, 3> nx{1, 1, 1};
    std::vector<double> T;
    std::vector<uint8_t> state;  // 0 far, 1 trial, 2 accepted, 3 blocked

    Solver(const MetricField& f, const CausalGridSpec& s, const BackgroundMetric& hh)
        : field(f), spec(s), h(hh), nbr(NeighborTable::get(s.dim - 1)), sdim(s.dim - 1) {
        for (int a = 0; a < sdim; ++a) nx[static_cast<size_t>(a)] = s.counts[static_cast<size_t>(a + 1)];
        const size_t total = static_cast<size_t>(nx[0]) * nx[1] * nx[2];
        T.assign(total, kInf);
        state.assign(total, 0);
    }

    size_t idx(int i, int j, int k) const {
        return (static_cast<size_t>(i) * nx[1] + j) * nx[2] + k;
    }
    void coords(size_t id, int& i, int& j, int& k) const {
        k = static_cast<int>(id % nx[2]);
        j = static_cast<int>((id / nx[2]) % nx[1]);
        i = static_cast<int>(id / (static_cast<size_t>(nx[1]) * nx[2]));
    }
    VecN spatial_point(int i, int j, int k) const {
        VecN x(spec.dim);
        x[0] = 0.5 * (spec.lo[0] + spec.lo[0] + spec.spacing[0] * (spec.counts[0] - 1));
        const int ii[3] = {i, j, k};
        for (int a = 0; a < sdim; ++a)
            x[a + 1] = spec.lo[a + 1] + spec.spacing[a + 1] * ii[a];
        return x;
    }
    bool blocked(const VecN& x) const {
        if (field.domain.exclusion_radius > 0) {
            double r2 = 0;
            for (int a = 1; a < spec.dim; ++a) r2 += x[a] * x[a];
            if (r2 < field.domain.exclusion_radius * field.domain.exclusion_radius)
                return true;
        }
        for (int a = 1; a < spec.dim; ++a)
            if (x[a] < field.domain.lo[a] || x[a] > field.domain.hi[a]) return true;
        return false;
    }

    // One triangle update for node (i,j,k): the arrival through the simplex
    // spanned by the given neighbors.
    double triangle_update(int i, int j, int k, const Triangle& tri) const {
        double Tc[3];
        VecN d[3];
        int cnt = tri.size;
        for (int c = 0; c < cnt; ++c) {
            const auto& off = nbr.offsets[static_cast<size_t>(tri.corners[c])];
            const int ni = i + off[0], nj = j + off[1], nk = k + off[2];
            if (ni < 0 || ni >= nx[0] || nj < 0 || nj >= nx[1] || nk < 0 || nk >= nx[2])
                return kInf;
            const size_t nid = idx(ni, nj, nk);
            if (state[nid] == 3) return kInf;
            Tc[c] = T[nid];
            d[c] = VecN(spec.dim);
            for (int a = 0; a < sdim; ++a)
                d[c][a + 1] = off[a] * spec.spacing[a + 1];
        }
        bool any_finite = false;
        for (int c = 0; c < cnt; ++c) any_finite |= std::isfinite(Tc[c]);
        if (!any_finite) return kInf;

        VecN xc = spatial_point(i, j, k);
        // metric frozen at the midpoint toward the triangle centroid
        VecN mid = xc;
        for (int c = 0; c < cnt; ++c)
            for (int a = 1; a < spec.dim; ++a) mid[a] += d[c][a] / (2.0 * cnt);
        if (blocked(mid)) mid = xc;
        MatN g = eval_metric_raw(field, mid);
        VecN fut = field.future_at(mid);

        auto value_at = [&](const double* lam) {
            VecN delta(spec.dim);
            double tval = 0;
            for (int c = 0; c < cnt; ++c) {
                if (lam[c] > 0 && !std::isfinite(Tc[c])) return kInf;
                tval += lam[c] * Tc[c];
                for (int a = 1; a < spec.dim; ++a) delta[a] += lam[c] * d[c][a];
            }
            const double len = h.norm(delta);
            if (len < 1e-30) return kInf;
            VecN u = delta;
            u *= 1.0 / len;
            const double s = directional_slowness(g, fut, u);
            if (!std::isfinite(s)) return kInf;
            return tval + s * len;
        };

        // corners, edge midpoints, centroid; then two shrink rounds
        double best = kInf;
        double best_lam[3] = {1, 0, 0};
        auto consider = [&](double l0, double l1, double l2) {
            double lam[3] = {l0, l1, l2};
            const double v = value_at(lam);
            if (v < best) {
                best = v;
                best_lam[0] = l0;
                best_lam[1] = l1;
                best_lam[2] = l2;
            }
        };
        if (cnt == 2) {
            for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) consider(1 - t, t, 0);
            double width = 0.25;
            for (int round = 0; round < 6; ++round) {
                const double c0 = best_lam[1];
                for (double t : {c0 - width, c0 + width}) {
                    if (t >= 0 && t <= 1) consider(1 - t, t, 0);
                }
                width *= 0.5;
            }
        } else {
            consider(1, 0, 0);
            consider(0, 1, 0);
            consider(0, 0, 1);
            consider(0.5, 0.5, 0);
            consider(0.5, 0, 0.5);
            consider(0, 0.5, 0.5);
            consider(1.0 / 3, 1.0 / 3, 1.0 / 3);
            double width = 1.0 / 3;
            for (int round = 0; round < 5; ++round) {
                const double b0 = best_lam[0], b1 = best_lam[1], b2 = best_lam[2];
                const double offsets[6][3] = {{width, -width, 0}, {-width, width, 0},
                                              {width, 0, -width}, {-width, 0, width},
                                              {0, width, -width}, {0, -width, width}};
                for (const auto& o : offsets) {
                    double l0 = b0 + o[0], l1 = b1 + o[1], l2 = b2 + o[2];
                    if (l0 < 0 || l1 < 0 || l2 < 0) continue;
                    const double s = l0 + l1 + l2;
                    if (s <= 0) continue;
                    consider(l0 / s, l1 / s, l2 / s);
                }
                width *= 0.5;
            }
        }
        return best;
    }

    double recompute(int i, int j, int k, const std::vector<int>* only_triangles) const {
        double best = kInf;
        const std::vector<int>* tris = only_triangles;
        std::vector<int> all;
        if (!tris) {
            all.resize(nbr.triangles.size());
            for (size_t t = 0; t < all.size(); ++t) all[t] = static_cast<int>(t);
            tris = &all;
        }
        for (int t : *tris)
            best = std::min(best, triangle_update(i, j, k, nbr.triangles[static_cast<size_t>(t)]));
        return best;
    }
};

}  // namespace

std::vector<double> solve_arrival(const MetricField& field, const std::vector<VecN>& sources,
                                  const CausalGridSpec& spec, const BackgroundMetric& h,
                                  const EikonalOptions& opts) {
    if (field.depends_on(0))
        throw InvalidInput("solve_arrival: chart-time-dependent metrics unsupported");
    const int sdim = spec.dim - 1;
    if (sdim != 2 && sdim != 3)
        throw InvalidInput("solve_arrival: spatial dimension must be 2 or 3");

    Solver sv(field, spec, h);
    const auto& nbr = sv.nbr;

    // block cells outside the chart or inside a singular cut-out; spot-check
    // the signature on a probe lattice
    for (int i = 0; i < sv.nx[0]; ++i)
        for (int j = 0; j < sv.nx[1]; ++j)
            for (int k = 0; k < sv.nx[2]; ++k) {
                const VecN xc = sv.spatial_point(i, j, k);
                if (sv.blocked(xc)) {
                    sv.state[sv.idx(i, j, k)] = 3;
                } else if (i % 8 == 4 && j % 8 == 4 && k % 8 == 4) {
                    if (!has_lorentzian_signature(eval_metric_raw(field, xc)))
                        throw InvalidMetric("solve_arrival: non-Lorentzian cone at a cell");
                }
            }

    using HeapItem = std::pair<double, size_t>;
    std::priority_queue<HeapItem, std::vector<HeapItem>, std::greater<HeapItem>> heap;

    // seed: short straight-ray arrival estimates near every source
    const int R = opts.seed_radius_cells;
    for (const VecN& src : sources) {
        std::array<int, 3> c0{0, 0, 0};
        bool inside = true;
        for (int a = 0; a < sdim; ++a) {
            const double t = (src[a + 1] - spec.lo[a + 1]) / spec.spacing[a + 1];
            c0[static_cast<size_t>(a)] = static_cast<int>(std::lround(t));
            if (c0[static_cast<size_t>(a)] < -R ||
                c0[static_cast<size_t>(a)] >= sv.nx[static_cast<size_t>(a)] + R)
                inside = false;
        }
        if (!inside) continue;
        for (int di = -R; di <= R; ++di)
            for (int dj = -R; dj <= R; ++dj)
                for (int dk = (sdim == 3 ? -R : 0); dk <= (sdim == 3 ? R : 0); ++dk) {
                    const int i = c0[0] + di, j = c0[1] + dj, k = (sdim == 3 ? c0[2] + dk : 0);
                    if (i < 0 || i >= sv.nx[0] || j < 0 || j >= sv.nx[1] || k < 0 ||
                        k >= sv.nx[2])
                        continue;
                    const size_t id = sv.idx(i, j, k);
                    if (sv.state[id] == 3) continue;
                    VecN xc = sv.spatial_point(i, j, k);
                    VecN delta = xc - src;
                    delta[0] = 0;
                    const double len = h.norm(delta);
                    double tval;
                    if (len < 1e-12) {
                        tval = src[0];
                    } else {
                        VecN u = delta;
                        u *= 1.0 / len;
                        // straight-ray slowness integral, 3-node quadrature
                        const auto& xs = gl_nodes(3);
                        const auto& ws = gl_weights(3);
                        double acc = 0;
                        bool ok = true;
                        for (int qn = 0; qn < 3 && ok; ++qn) {
                            VecN p = src + (0.5 * (1.0 + xs[static_cast<size_t>(qn)])) * delta;
                            if (sv.blocked(p)) { ok = false; break; }
                            MatN g = eval_metric_raw(field, p);
                            VecN fut = field.future_at(p);
                            const double s = directional_slowness(g, fut, u);
                            if (!std::isfinite(s)) { ok = false; break; }
                            acc += 0.5 * ws[static_cast<size_t>(qn)] * s * len;
                        }
                        if (!ok) continue;
                        tval = src[0] + acc;
                    }
                    if (tval < sv.T[id]) {
                        sv.T[id] = tval;
                        sv.state[id] = 1;
                        heap.push({tval, id});
                    }
                }
    }

    // marching
    while (!heap.empty()) {
        const auto [tv, id] = heap.top();
        heap.pop();
        if (sv.state[id] == 2 || tv > sv.T[id]) continue;
        sv.state[id] = 2;
        int i, j, k;
        sv.coords(id, i, j, k);
        for (size_t nb = 0; nb < nbr.offsets.size(); ++nb) {
            const auto& off = nbr.offsets[nb];
            const int vi = i - off[0], vj = j - off[1], vk = k - off[2];
            if (vi < 0 || vi >= sv.nx[0] || vj < 0 || vj >= sv.nx[1] || vk < 0 ||
                vk >= sv.nx[2])
                continue;
            const size_t vid = sv.idx(vi, vj, vk);
            if (sv.state[vid] >= 2) continue;
            // the accepted node sits at offset `nb` of v; recompute only the
            // sectors through it
            const double cand =
                sv.recompute(vi, vj, vk, &nbr.triangles_of_neighbor[nb]);
            if (cand < sv.T[vid] - 1e-15) {
                sv.T[vid] = cand;
                sv.state[vid] = 1;
                heap.push({cand, vid});
            }
        }
    }

    // fixed-point polish for strongly tilted cones
    for (int sweep = 0; sweep < opts.post_sweeps; ++sweep) {
        double max_change = 0;
        for (int i = 0; i < sv.nx[0]; ++i)
            for (int j = 0; j < sv.nx[1]; ++j)
                for (int k = 0; k < sv.nx[2]; ++k) {
                    const size_t id = sv.idx(i, j, k);
                    if (sv.state[id] == 3) continue;
                    const double cand = sv.recompute(i, j, k, nullptr);
                    if (cand < sv.T[id]) {
                        max_change = std::max(max_change, sv.T[id] - cand);
                        sv.T[id] = cand;
                    }
                }
        if (max_change < opts.sweep_tol) break;
    }
    return sv.T;
}

// ---------------------------------------------------------------------------

size_t CausalGrid::spatial_index(const std::array<int, kMaxDim>& ix) const {
    size_t id = 0;
    for (int a = 1; a < spec.dim; ++a)
        id = id * static_cast<size_t>(spec.counts[static_cast<size_t>(a)]) +
             static_cast<size_t>(ix[static_cast<size_t>(a)]);
    return id;
}

std::optional<size_t> CausalGrid::spatial_cell_of(const VecN& x) const {
    std::array<int, kMaxDim> ix{};
    for (int a = 1; a < spec.dim; ++a) {
        const double t = (x[a] - spec.lo[a]) / spec.spacing[a];
        const int i = static_cast<int>(std::lround(t));
        if (i < 0 || i >= spec.counts[static_cast<size_t>(a)]) return std::nullopt;
        ix[static_cast<size_t>(a)] = i;
    }
    return spatial_index(ix);
}

double CausalGrid::arrival_at(const VecN& x) const {
    // multilinear over the spatial axes; outside the grid extent the arrival
    // is unknown, not small
    std::array<int, kMaxDim> base{};
    std::array<double, kMaxDim> frac{};
    for (int a = 1; a < spec.dim; ++a) {
        double t = (x[a] - spec.lo[a]) / spec.spacing[a];
        if (t < -0.5 || t > spec.counts[static_cast<size_t>(a)] - 0.5) return kInf;
        t = std::clamp(t, 0.0, static_cast<double>(spec.counts[static_cast<size_t>(a)] - 1));
        int i = static_cast<int>(std::floor(t));
        i = std::min(i, spec.counts[static_cast<size_t>(a)] - 2);
        base[static_cast<size_t>(a)] = std::max(i, 0);
        frac[static_cast<size_t>(a)] = t - base[static_cast<size_t>(a)];
    }
    const int sdim = spec.dim - 1;
    double acc = 0;
    for (int corner = 0; corner < (1 << sdim); ++corner) {
        double w = 1;
        std::array<int, kMaxDim> ix = base;
        for (int a = 0; a < sdim; ++a) {
            const bool hi = (corner >> a) & 1;
            const double f = frac[static_cast<size_t>(a + 1)];
            w *= hi ? f : (1.0 - f);
            if (hi) ix[static_cast<size_t>(a + 1)] += 1;
            if (ix[static_cast<size_t>(a + 1)] >=
                spec.counts[static_cast<size_t>(a + 1)])
                return kInf;
        }
        const double tv = arrival[spatial_index(ix)];
        if (!std::isfinite(tv)) {
            if (w > 1e-12) return kInf;
            continue;
        }
        acc += w * tv;
    }
    return acc;
}

bool CausalGrid::in_I(const VecN& x) const {
    const double tv = arrival_at(x);
    return std::isfinite(tv) && x[0] >= tv + spec.spacing[0];
}

bool CausalGrid::in_J(const VecN& x) const {
    const double tv = arrival_at(x);
    return std::isfinite(tv) && x[0] >= tv - 0.5 * spec.spacing[0];
}

CausalGrid future_sets(const MetricField& field, const std::vector<VecN>& sources,
                       const CausalGridSpec& spec, const BackgroundMetric& h,
                       const EikonalOptions& opts) {
    CausalGrid grid;
    grid.spec = spec;
    grid.arrival = solve_arrival(field, sources, spec, h, opts);
    const int nt = spec.counts[0];
    const size_t spatial = static_cast<size_t>(spec.spatial_cells());
    grid.J.assign(static_cast<size_t>(nt) * spatial, 0);
    grid.I.assign(static_cast<size_t>(nt) * spatial, 0);
    grid.E.assign(static_cast<size_t>(nt) * spatial, 0);
    const double dt = spec.spacing[0];
    for (size_t s = 0; s < spatial; ++s) {
        const double tv = grid.arrival[s];
        if (!std::isfinite(tv)) continue;
        for (int it = 0; it < nt; ++it) {
            const double t = spec.lo[0] + dt * it;
            const bool inJ = t >= tv - 0.5 * dt;
            const bool inI = t >= tv + dt;
            const size_t id = grid.mask_index(it, s);
            grid.J[id] = inJ;
            grid.I[id] = inI;
            grid.E[id] = inJ && !inI;
        }
    }
    return grid;
}

void write_masks(const std::string& path_prefix, const CausalGrid& grid,
                 const std::string& scenario_id, const std::string& version) {
    {
        std::FILE* f = std::fopen((path_prefix + "_header.json").c_str(), "w");
        if (!f) throw ConfigError("cannot open mask header");
        std::fprintf(f, "{\n  \"scenario\": \"%s\",\n  \"version\": \"%s\",\n",
                     scenario_id.c_str(), version.c_str());
        std::fprintf(f, "  \"dim\": %d,\n  \"counts\": [", grid.spec.dim);
        for (int a = 0; a < grid.spec.dim; ++a)
            std::fprintf(f, "%s%d", a ? ", " : "", grid.spec.counts[static_cast<size_t>(a)]);
        std::fprintf(f, "],\n  \"origin\": [");
        for (int a = 0; a < grid.spec.dim; ++a)
            std::fprintf(f, "%s%.12g", a ? ", " : "", grid.spec.lo[a]);
        std::fprintf(f, "],\n  \"spacing\": [");
        for (int a = 0; a < grid.spec.dim; ++a)
            std::fprintf(f, "%s%.12g", a ? ", " : "", grid.spec.spacing[a]);
        std::fprintf(f, "],\n  \"order\": \"t-major, spatial row-major\",\n");
        const std::string stem =
            path_prefix.substr(path_prefix.find_last_of('/') + 1);
        std::fprintf(f, "  \"files\": [\"%s_J.bin\", \"%s_I.bin\", \"%s_E.bin\"]\n}\n",
                     stem.c_str(), stem.c_str(), stem.c_str());
        std::fclose(f);
    }
    auto dump = [&](const std::string& name, const std::vector<uint8_t>& m) {
        std::FILE* f = std::fopen((path_prefix + "_" + name + ".bin").c_str(), "wb");
        if (!f) throw ConfigError("cannot open mask binary");
        std::fwrite(m.data(), 1, m.size(), f);
        std::fclose(f);
    };
    dump("J", grid.J);
    dump("I", grid.I);
    dump("E", grid.E);
}

// ---------------------------------------------------------------------------

GeneratorBundle boundary_generators(const MetricField& field, const CausalGrid& grid,
                                    const HypersurfaceData& slice,
                                    const SurfaceLevelSet& surf, GeneratorDirection dir,
                                    int n_samples, const BackgroundMetric& h, double t_max) {
    GeneratorBundle out;
    std::vector<VecN> pts = sample_surface(field, slice, surf, n_samples, h);
    for (const VecN& p : pts) {
        SurfaceNormals nor = build_normals(field, slice, surf, p);
        VecN v0 = (dir == GeneratorDirection::kKMinus) ? nor.K_minus : nor.K_plus;
        CurveTrajectory traj;
        try {
            traj = integrate_geodesic(field, p, v0, 0.0, t_max);
        } catch (const std::runtime_error&) {
            continue;
        }
        // truncate at the first entry into I (loss of maximization)
        double cut = traj.t_end();
        int reason = traj.exited_domain ? 1 : 2;
        for (size_t k = 0; k < traj.params.size(); ++k) {
            if (grid.in_I(traj.points[k])) {
                double lo = (k == 0) ? traj.params[0] : traj.params[k - 1];
                double hi = traj.params[k];
                for (int it = 0; it < 40; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if (grid.in_I(traj.point_at(mid)))
                        hi = mid;
                    else
                        lo = mid;
                }
                cut = hi;
                reason = 0;
                break;
            }
        }
        CurveTrajectory cutd;
        for (size_t k = 0; k < traj.params.size() && traj.params[k] <= cut; ++k) {
            cutd.params.push_back(traj.params[k]);
            cutd.points.push_back(traj.points[k]);
            cutd.velocities.push_back(traj.velocities[k]);
        }
        if (cutd.params.empty() || cutd.params.back() < cut - 1e-12) {
            cutd.params.push_back(cut);
            cutd.points.push_back(traj.point_at(cut));
            cutd.velocities.push_back(traj.velocity_at(cut));
        }
        if (cutd.params.size() < 2) continue;
        cutd.segment_character.assign(cutd.params.size() - 1, CausalCharacter::kNull);
        cutd.exited_domain = (reason == 1);

        const auto [kp, km] = convergence_pair(field, slice, surf, p);
        out.generators.push_back(std::move(cutd));
        out.exit_params.push_back(cut);
        out.exit_reason.push_back(reason);
        out.start_points.push_back(p);
        out.start_velocities.push_back(v0);
        out.start_convergence.push_back(dir == GeneratorDirection::kKMinus ? km : kp);
    }
    return out;
}

EpsCompareReport eps_maximizer_compare(const RegularizationFamily& family,
                                       const HypersurfaceData& slice,
                                       const SurfaceLevelSet& surf,
                                       const GeneratorBundle& base, double delta,
                                       const CausalGridSpec& spec,
                                       const BackgroundMetric& h) {
    if (!(delta > 0.0 && delta < 1.0))
        throw InvalidInput("eps_maximizer_compare: delta must be in (0,1)");
    EpsCompareReport rep;
    rep.delta = delta;
    const double t_hi = 1.0 - delta;
    const size_t ne = family.eps_list.size();
    const size_t ng = base.generators.size();

    // integrate every narrowed-metric generator first, then measure all
    // distances over a window common to the whole sweep (narrowed members of
    // different eps lose different amounts of chart)
    std::vector<MetricField> members;
    members.reserve(ne);
    for (double eps : family.eps_list) members.push_back(narrow_member(family, eps));

    std::vector<std::vector<std::optional<CurveTrajectory>>> runs(
        ne, std::vector<std::optional<CurveTrajectory>>(ng));
    std::vector<double> window(ng, t_hi);
    for (size_t e = 0; e < ne; ++e) {
        for (size_t gi = 0; gi < ng; ++gi) {
            const VecN& p = base.start_points[gi];
            try {
                SurfaceNormals nor = build_normals(members[e], slice, surf, p);
                const bool ingoing =
                    quad_form(h.h, base.start_velocities[gi], nor.K_minus) >
                    quad_form(h.h, base.start_velocities[gi], nor.K_plus);
                VecN v0 = ingoing ? nor.K_minus : nor.K_plus;
                CurveTrajectory ge = integrate_geodesic(members[e], p, v0, 0.0, t_hi);
                window[gi] = std::min(window[gi], ge.t_end());
                runs[e][gi] = std::move(ge);
            } catch (const std::runtime_error&) {
                runs[e][gi] = std::nullopt;
            }
        }
    }
    for (size_t gi = 0; gi < ng; ++gi)
        window[gi] = std::min(window[gi], base.generators[gi].t_end());

    for (size_t e = 0; e < ne; ++e) {
        EpsCompareRow row;
        row.eps = family.eps_list[e];

        CausalGrid ggrid;
        bool have_grid = spec.counts[0] >= 2;
        if (have_grid) {
            try {
                ggrid = future_sets(members[e], base.start_points, spec, h);
            } catch (const std::runtime_error&) {
                have_grid = false;
            }
        }

        for (size_t gi = 0; gi < ng; ++gi) {
            if (!runs[e][gi]) {
                row.truncated = true;
                continue;
            }
            const CurveTrajectory& gamma = base.generators[gi];
            const CurveTrajectory& ge = *runs[e][gi];
            const double t_cmp = window[gi];
            if (t_cmp < t_hi - 1e-9) row.truncated = true;
            for (int s = 0; s <= 50; ++s) {
                const double t = t_cmp * s / 50.0;
                row.sup_distance =
                    std::max(row.sup_distance, h.dist(gamma.point_at(t), ge.point_at(t)));
            }
            if (have_grid) {
                for (int s = 1; s <= 20; ++s) {
                    const double t = t_cmp * s / 20.0;
                    if (ggrid.in_I(ge.point_at(t))) row.generator_in_E = false;
                }
            }
        }
        rep.rows.push_back(row);
    }
    if (rep.rows.size() >= 2)
        rep.distances_decrease =
            rep.rows.back().sup_distance <= rep.rows.front().sup_distance / 4.0;
    return rep;
}

CompactnessReport compactness_probe(const MetricField& field, const HypersurfaceData& slice,
                                    const SurfaceLevelSet& surf, double c_min,
                                    int lambda_steps, const GeneratorBundle& horizon,
                                    const CausalGridSpec& spec, const BackgroundMetric& h,
                                    double lambda_max_override) {
    if (!(c_min > 0)) throw InvalidInput("compactness_probe: c_min must be positive");
    CompactnessReport rep;
    rep.lambda_max = lambda_max_override > 0 ? lambda_max_override : 2.0 / c_min;

    // occupancy of pi(F) on the spacetime grid
    const size_t spatial = static_cast<size_t>(spec.spatial_cells());
    std::vector<uint8_t> occupied(static_cast<size_t>(spec.counts[0]) * spatial, 0);
    auto cell_of = [&](const VecN& x) -> std::optional<size_t> {
        const double tt = (x[0] - spec.lo[0]) / spec.spacing[0];
        const int it = static_cast<int>(std::lround(tt));
        if (it < 0 || it >= spec.counts[0]) return std::nullopt;
        std::array<int, kMaxDim> ix{};
        for (int a = 1; a < spec.dim; ++a) {
            const double t = (x[a] - spec.lo[a]) / spec.spacing[a];
            const int i = static_cast<int>(std::lround(t));
            if (i < 0 || i >= spec.counts[static_cast<size_t>(a)]) return std::nullopt;
            ix[static_cast<size_t>(a)] = i;
        }
        size_t id = 0;
        for (int a = 1; a < spec.dim; ++a)
            id = id * static_cast<size_t>(spec.counts[static_cast<size_t>(a)]) +
                 static_cast<size_t>(ix[static_cast<size_t>(a)]);
        return static_cast<size_t>(it) * spatial + id;
    };

    rep.bound_lo = VecN(spec.dim);
    rep.bound_hi = VecN(spec.dim);
    for (int a = 0; a < spec.dim; ++a) {
        rep.bound_lo[a] = kInf;
        rep.bound_hi[a] = -kInf;
    }

    // sweep from the horizon bundle's own base points (the same congruence),
    // so coverage reduces to the affine-extent claim, plus an independent
    // resampling of S
    std::vector<VecN> pts = horizon.start_points;
    for (const VecN& p : sample_surface(field, slice, surf, 64, h)) pts.push_back(p);
    const double min_spacing = *std::min_element(spec.spacing.a.begin(),
                                                 spec.spacing.a.begin() + spec.dim);
    for (const VecN& p : pts) {
        SurfaceNormals nor = build_normals(field, slice, surf, p);
        for (int ls = 0; ls <= lambda_steps; ++ls) {
            const double lam = rep.lambda_max * ls / lambda_steps;
            VecN pt = p;
            // mark through a short trajectory; lambda = 0 contributes S itself
            if (lam < 1e-12) {
                if (auto c = cell_of(pt)) occupied[*c] = 1;
                for (int a = 0; a < spec.dim; ++a) {
                    rep.bound_lo[a] = std::min(rep.bound_lo[a], pt[a]);
                    rep.bound_hi[a] = std::max(rep.bound_hi[a], pt[a]);
                }
                continue;
            }
            VecN v0 = nor.K_minus;
            v0 *= lam;
            CurveTrajectory traj;
            try {
                traj = integrate_geodesic(field, p, v0, 0.0, 1.0);
            } catch (const std::runtime_error&) {
                rep.inconclusive = true;
                continue;
            }
            if (traj.exited_domain) {
                // leaving through the outer box is a chart failure; hitting the
                // singular cut-out just truncates the sweep consistently with
                // the horizon bundle
                const VecN& last = traj.points.back();
                bool through_core = false;
                if (field.domain.exclusion_radius > 0) {
                    double r2 = 0;
                    for (int a = 1; a < spec.dim; ++a) r2 += last[a] * last[a];
                    if (r2 < std::pow(field.domain.exclusion_radius + 2 * min_spacing, 2))
                        through_core = true;
                }
                if (!through_core) rep.inconclusive = true;
            }
            // dense resample so the occupancy has no gaps
            const double step = 0.4 * min_spacing /
                                std::max(1e-12, h.norm(traj.velocities.front()));
            for (double t = 0; t <= traj.t_end(); t += step) {
                VecN x = traj.point_at(t);
                if (auto c = cell_of(x)) occupied[*c] = 1;
                for (int a = 0; a < spec.dim; ++a) {
                    rep.bound_lo[a] = std::min(rep.bound_lo[a], x[a]);
                    rep.bound_hi[a] = std::max(rep.bound_hi[a], x[a]);
                }
            }
        }
    }

    // dilate occupancy by one cell
    {
        std::vector<uint8_t> dil = occupied;
        const int nt = spec.counts[0];
        std::array<int, kMaxDim> sc{};
        for (int a = 1; a < spec.dim; ++a) sc[static_cast<size_t>(a)] = spec.counts[static_cast<size_t>(a)];
        const int sx = sc[1], sy = sc[2], sz = (spec.dim > 3 ? sc[3] : 1);
        // simple 1-cell dilation over all axes
        std::vector<uint8_t> src = occupied;
        for (int it = 0; it < nt; ++it)
            for (int i = 0; i < sx; ++i)
                for (int j = 0; j < sy; ++j)
                    for (int k = 0; k < sz; ++k) {
                        const size_t id =
                            ((static_cast<size_t>(it) * sx + i) * sy + j) * sz + k;
                        if (!src[id]) continue;
                        for (int dt = -1; dt <= 1; ++dt)
                            for (int di = -1; di <= 1; ++di)
                                for (int dj = -1; dj <= 1; ++dj)
                                    for (int dk = -1; dk <= 1; ++dk) {
                                        const int t2 = it + dt, i2 = i + di, j2 = j + dj,
                                                  k2 = k + dk;
                                        if (t2 < 0 || t2 >= nt || i2 < 0 || i2 >= sx ||
                                            j2 < 0 || j2 >= sy || k2 < 0 || k2 >= sz)
                                            continue;
                                        dil[((static_cast<size_t>(t2) * sx + i2) * sy + j2) *
                                                sz +
                                            k2] = 1;
                                    }
                    }
        occupied = std::move(dil);
    }

    // coverage of the discrete horizon
    for (size_t gi = 0; gi < horizon.generators.size(); ++gi) {
        const CurveTrajectory& g = horizon.generators[gi];
        for (size_t k = 0; k < g.points.size(); ++k) {
            ++rep.total;
            const auto c = cell_of(g.points[k]);
            if (c && occupied[*c]) {
                ++rep.covered;
            } else {
                rep.violations.push_back(g.points[k]);
                rep.violation_multipliers.push_back(g.params[k]);
            }
        }
    }
    rep.pass = !rep.inconclusive && rep.violations.empty() && rep.total > 0;
    return rep;
}

void write_eps_compare_csv(const std::string& path, const EpsCompareReport& rep,
                           const std::string& scenario_id, const std::string& version) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw ConfigError("cannot open " + path);
    std::fprintf(f, "scenario,version,eps,delta,sup_distance,in_E,truncated,decrease_pass\n");
    for (const auto& r : rep.rows)
        std::fprintf(f, "%s,%s,%.12g,%.12g,%.12g,%d,%d,%d\n", scenario_id.c_str(),
                     version.c_str(), r.eps, rep.delta, r.sup_distance,
                     r.generator_in_E ? 1 : 0, r.truncated ? 1 : 0,
                     rep.distances_decrease ? 1 : 0);
    std::fclose(f);
}

void write_compactness_json(const std::string& path, const CompactnessReport& rep,
                            const std::string& scenario_id, const std::string& version) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw ConfigError("cannot open " + path);
    std::fprintf(f, "{\n  \"scenario\": \"%s\",\n  \"version\": \"%s\",\n",
                 scenario_id.c_str(), version.c_str());
    std::fprintf(f, "  \"pass\": %s,\n  \"inconclusive\": %s,\n",
                 rep.pass ? "true" : "false", rep.inconclusive ? "true" : "false");
    std::fprintf(f, "  \"lambda_max\": %.12g,\n  \"covered\": %d,\n  \"total\": %d,\n",
                 rep.lambda_max, rep.covered, rep.total);
    std::fprintf(f, "  \"violations\": %d", static_cast<int>(rep.violations.size()));
    if (!rep.violations.empty()) {
        std::fprintf(f, ",\n  \"first_violation\": [");
        for (int i = 0; i < rep.violations[0].n; ++i)
            std::fprintf(f, "%s%.12g", i ? ", " : "", rep.violations[0][i]);
        std::fprintf(f, "],\n  \"first_violation_multiplier\": %.12g",
                     rep.violation_multipliers[0]);
    }
    std::fprintf(f, "\n}\n");
    std::fclose(f);
}

}  // namespace conelab
