#include "conelab/regularizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "conelab/curvature.hpp"
#include "conelab/errors.hpp"
#include "conelab/spline.hpp"

namespace conelab {

MollifierKernel MollifierKernel::marginal(int full_dim, int active_axes) {
    MollifierKernel k;
    k.active_axes = active_axes;
    k.exponent = 4.0 + 0.5 * (full_dim - active_axes);
    // unit mass on the active-axes unit ball:
    // S_{d-1} * 1/2 B(d/2, p+1) * C = 1
    const double d = active_axes;
    const double p = k.exponent;
    const double surf = 2.0 * std::pow(M_PI, d / 2.0) / std::tgamma(d / 2.0);
    const double radial =
        0.5 * std::tgamma(d / 2.0) * std::tgamma(p + 1.0) / std::tgamma(d / 2.0 + p + 1.0);
    k.norm_const = 1.0 / (surf * radial);
    return k;
}

double MollifierKernel::value(double r2) const {
    if (r2 >= 1.0) return 0.0;
    return norm_const * std::pow(1.0 - r2, exponent);
}

double MollifierKernel::mass_quadrature(int order) const {
    const double d = active_axes;
    const double surf = 2.0 * std::pow(M_PI, d / 2.0) / std::tgamma(d / 2.0);
    const auto& xs = gl_nodes(order);
    const auto& ws = gl_weights(order);
    double acc = 0;
    for (int i = 0; i < order; ++i) {
        const double r = 0.5 * (1.0 + xs[static_cast<size_t>(i)]);
        acc += 0.5 * ws[static_cast<size_t>(i)] * value(r * r) * std::pow(r, d - 1.0);
    }
    return surf * acc;
}

namespace {

struct AxisGrid {
    int axis;
    double lo, spacing;
    int count;
};

// 1D Gauss-Legendre panels over [-eps, eps], split at kink crossings.
void panel_nodes(double eps, const std::vector<double>& breaks, int order,
                 std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.clear();
    weights.clear();
    std::vector<double> edges = {-eps, eps};
    for (double b : breaks)
        if (b > -eps && b < eps) edges.push_back(b);
    std::sort(edges.begin(), edges.end());
    const auto& xs = gl_nodes(order);
    const auto& ws = gl_weights(order);
    for (size_t p = 0; p + 1 < edges.size(); ++p) {
        const double a = edges[p], b = edges[p + 1];
        const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
        for (int i = 0; i < order; ++i) {
            nodes.push_back(mid + half * xs[static_cast<size_t>(i)]);
            weights.push_back(half * ws[static_cast<size_t>(i)]);
        }
    }
}

}  // namespace

MetricField mollify(const MetricField& base, double eps, const MollifyOptions& opts) {
    const int n = base.dim;
    if (eps <= 0) throw InvalidInput("mollify: eps must be positive");

    std::vector<int> dep_axes;
    for (int a = 0; a < n; ++a)
        if (base.depends_on(a)) dep_axes.push_back(a);

    MetricField out = base;
    out.regularity = Regularity::kSmooth;
    out.name = base.name + "*rho";
    if (dep_axes.empty()) return out;  // constant metrics are fixed points
    const int d = static_cast<int>(dep_axes.size());
    if (d > 3) throw InvalidInput("mollify: more than 3 dependent axes unsupported");

    // Shrink the domain along dependent axes; enlarge any singular cut-out.
    for (int a : dep_axes) {
        out.domain.lo[a] = base.domain.lo[a] + eps;
        out.domain.hi[a] = base.domain.hi[a] - eps;
        if (out.domain.lo[a] >= out.domain.hi[a])
            throw DomainError("mollify: eps too large for chart domain");
    }

    const MollifierKernel kernel = MollifierKernel::marginal(n, d);

    // Sampling grid per dependent axis.
    std::vector<AxisGrid> grids;
    size_t total_nodes = 1;
    for (int a : dep_axes) {
        AxisGrid g;
        g.axis = a;
        const bool kinked = !base.kink_planes[static_cast<size_t>(a)].empty() ||
                            base.regularity != Regularity::kSmooth;
        const double span = out.domain.hi[a] - out.domain.lo[a];
        double spacing = kinked ? eps / opts.kink_spacing_divisor
                                : span / (opts.smooth_axis_nodes - 1);
        g.count = static_cast<int>(std::ceil(span / spacing)) + 1;
        g.spacing = span / (g.count - 1);
        g.lo = out.domain.lo[a];
        grids.push_back(g);
        total_nodes *= static_cast<size_t>(g.count);
    }
    // Budget: coarsen non-kink axes if the tensor grid is too large.
    while (total_nodes > opts.node_budget) {
        bool changed = false;
        for (AxisGrid& g : grids) {
            const bool kinked = !base.kink_planes[static_cast<size_t>(g.axis)].empty() ||
                                base.regularity != Regularity::kSmooth;
            if (kinked || g.count <= 17) continue;
            total_nodes /= static_cast<size_t>(g.count);
            g.count = (g.count + 1) / 2;
            g.spacing = (out.domain.hi[g.axis] - out.domain.lo[g.axis]) / (g.count - 1);
            total_nodes *= static_cast<size_t>(g.count);
            changed = true;
        }
        if (!changed) break;
    }
    if (total_nodes > 4 * opts.node_budget)
        throw InvalidInput("mollify: kink-resolving axes exceed the node budget at eps = " +
                           std::to_string(eps));

    // Quadrature nodes per dependent axis are position dependent only through
    // kink splits; precompute the unsplit rule once.
    std::vector<double> base_nodes, base_weights;
    panel_nodes(eps, {}, opts.quad_order, base_nodes, base_weights);

    const int ncomp = n * (n + 1) / 2;
    std::vector<std::pair<int, int>> comp_ij;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) comp_ij.emplace_back(i, j);

    std::vector<int> dims;
    std::vector<double> los, hs;
    for (const AxisGrid& g : grids) {
        dims.push_back(g.count);
        los.push_back(g.lo);
        hs.push_back(g.spacing);
    }

    std::vector<std::vector<double>> samples(
        static_cast<size_t>(ncomp),
        std::vector<double>(total_nodes, 0.0));

    // The exclusion ball grows: points within eps of it cannot be convolved.
    const double base_excl = base.domain.exclusion_radius;
    const double out_excl =
        base_excl > 0 ? base_excl + eps + 3.0 * grids[0].spacing : 0.0;
    out.domain.exclusion_radius = out_excl;

    std::vector<double> qnodes[3], qweights[3];
    VecN p(n), q(n);
    MatN gmat(n);
    std::vector<size_t> idx(static_cast<size_t>(d), 0);
    // mid coordinates for independent axes
    for (int a = 0; a < n; ++a) p[a] = 0.5 * (out.domain.lo[a] + out.domain.hi[a]);

    bool done = false;
    size_t flat = 0;
    while (!done) {
        for (int k = 0; k < d; ++k)
            p[grids[static_cast<size_t>(k)].axis] =
                grids[static_cast<size_t>(k)].lo +
                grids[static_cast<size_t>(k)].spacing *
                    static_cast<double>(idx[static_cast<size_t>(k)]);

        // per-axis quadrature with kink splits local to this node
        for (int k = 0; k < d; ++k) {
            const int a = grids[static_cast<size_t>(k)].axis;
            const auto& kinks = base.kink_planes[static_cast<size_t>(a)];
            if (kinks.empty()) {
                qnodes[k] = base_nodes;
                qweights[k] = base_weights;
            } else {
                std::vector<double> breaks;
                for (double kk : kinks) breaks.push_back(p[a] - kk);
                panel_nodes(eps, breaks, opts.quad_order, qnodes[k], qweights[k]);
            }
        }

        // clamp convolution samples outside a singular core to its surface
        auto clamp_excl = [&](VecN& y) {
            if (base_excl <= 0) return;
            double r2 = 0;
            for (int i = 1; i < n; ++i) r2 += y[i] * y[i];
            const double r = std::sqrt(r2);
            if (r < base_excl) {
                const double s = base_excl / std::max(r, 1e-12);
                for (int i = 1; i < n; ++i) y[i] *= s;
            }
        };

        std::array<double, kMaxDim * kMaxDim> acc{};
        double wsum = 0.0;  // discrete kernel mass; dividing by it keeps
                            // constants (and the unit-mass property) exact
        std::vector<size_t> qi(static_cast<size_t>(d), 0);
        bool qdone = false;
        while (!qdone) {
            double w = 1.0, r2 = 0.0;
            q = p;
            for (int k = 0; k < d; ++k) {
                const double y = qnodes[k][qi[static_cast<size_t>(k)]];
                w *= qweights[k][qi[static_cast<size_t>(k)]];
                r2 += (y / eps) * (y / eps);
                q[grids[static_cast<size_t>(k)].axis] -= y;
            }
            const double rho = kernel.value(r2) / std::pow(eps, d);
            if (rho != 0.0) {
                clamp_excl(q);
                base.components(q, gmat);
                const double f = w * rho;
                wsum += f;
                for (int c = 0; c < ncomp; ++c)
                    acc[static_cast<size_t>(c)] +=
                        f * gmat(comp_ij[static_cast<size_t>(c)].first,
                                 comp_ij[static_cast<size_t>(c)].second);
            }
            int dd = 0;
            while (dd < d) {
                if (++qi[static_cast<size_t>(dd)] < qnodes[dd].size()) break;
                qi[static_cast<size_t>(dd)] = 0;
                ++dd;
            }
            qdone = (dd == d);
        }
        for (int c = 0; c < ncomp; ++c)
            samples[static_cast<size_t>(c)][flat] = acc[static_cast<size_t>(c)] / wsum;

        ++flat;
        int dd = d - 1;  // last axis fastest to match spline layout
        while (dd >= 0) {
            if (++idx[static_cast<size_t>(dd)] <
                static_cast<size_t>(grids[static_cast<size_t>(dd)].count))
                break;
            idx[static_cast<size_t>(dd)] = 0;
            --dd;
        }
        done = (dd < 0);
    }

    auto splines = std::make_shared<std::vector<UniformCubicSpline>>();
    splines->reserve(static_cast<size_t>(ncomp));
    for (int c = 0; c < ncomp; ++c)
        splines->emplace_back(d, dims, los, hs, std::move(samples[static_cast<size_t>(c)]));

    auto axes = std::make_shared<std::vector<int>>(dep_axes);
    auto comp_list = std::make_shared<std::vector<std::pair<int, int>>>(comp_ij);

    out.components = [splines, axes, comp_list, n](const VecN& x, MatN& g) {
        double xa[3] = {0, 0, 0};
        for (size_t k = 0; k < axes->size(); ++k) xa[k] = x[(*axes)[k]];
        g = MatN(n);
        for (size_t c = 0; c < comp_list->size(); ++c) {
            const double v = (*splines)[c].eval(xa);
            g((*comp_list)[c].first, (*comp_list)[c].second) = v;
            g((*comp_list)[c].second, (*comp_list)[c].first) = v;
        }
    };
    out.derivs = [splines, axes, comp_list, n](const VecN& x, Deriv3& der) {
        double xa[3] = {0, 0, 0};
        for (size_t k = 0; k < axes->size(); ++k) xa[k] = x[(*axes)[k]];
        der = Deriv3(n);
        for (size_t k = 0; k < axes->size(); ++k) {
            const int a = (*axes)[k];
            for (size_t c = 0; c < comp_list->size(); ++c) {
                const double v = (*splines)[c].eval_deriv(xa, static_cast<int>(k));
                der(a, (*comp_list)[c].first, (*comp_list)[c].second) = v;
                der(a, (*comp_list)[c].second, (*comp_list)[c].first) = v;
            }
        }
    };
    for (auto& kp : out.kink_planes) kp.clear();
    return out;
}

// ---------------------------------------------------------------------------

namespace {

// u_flat = g_moll(u, .) with u the chart future field of the base.
MetricField corrected_member(const MetricField& moll, const MetricField& base,
                             double lambda, double sign, const std::string& suffix) {
    MetricField out = moll;
    out.name = base.name + suffix;
    const int n = moll.dim;
    auto mcomp = moll.components;
    auto mder = moll.derivs;
    auto future = [&base, n](const VecN& x) { return base.future_at(x); };
    std::function<VecN(const VecN&)> fut = future;

    auto uflat_at = [mcomp, fut, n](const VecN& x) {
        MatN g(n);
        mcomp(x, g);
        VecN u = fut(x);
        return matvec(g, u);
    };

    out.components = [mcomp, uflat_at, lambda, sign, n](const VecN& x, MatN& g) {
        mcomp(x, g);
        VecN uf = uflat_at(x);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) g(i, j) += sign * lambda * uf[i] * uf[j];
    };
    const uint32_t mask = moll.dependence_mask;
    const double step = 1e-4;
    out.derivs = [mder, uflat_at, lambda, sign, mask, n, step](const VecN& x, Deriv3& d) {
        mder(x, d);
        for (int k = 0; k < n; ++k) {
            if (!((mask >> k) & 1u)) continue;
            VecN xp = x, xm = x, xp2 = x, xm2 = x;
            xp[k] += step;
            xm[k] -= step;
            xp2[k] += 2 * step;
            xm2[k] -= 2 * step;
            VecN up = uflat_at(xp), um = uflat_at(xm), up2 = uflat_at(xp2),
                 um2 = uflat_at(xm2);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    const double dp = (8.0 * (up[i] * up[j] - um[i] * um[j]) -
                                       (up2[i] * up2[j] - um2[i] * um2[j])) /
                                      (12.0 * step);
                    d(k, i, j) += sign * lambda * dp;
                }
        }
    };
    return out;
}

std::vector<VecN> halton_points_in_box(const Box& box, int count, int skip_axis = -1) {
    const int primes[6] = {2, 3, 5, 7, 11, 13};
    std::vector<VecN> pts;
    auto halton = [](int idx, int b) {
        double f = 1.0, r = 0.0;
        while (idx > 0) {
            f /= b;
            r += f * (idx % b);
            idx /= b;
        }
        return r;
    };
    int i = 1;
    while (static_cast<int>(pts.size()) < count) {
        VecN p(box.dim());
        for (int a = 0; a < box.dim(); ++a) {
            const double t = (a == skip_axis) ? 0.5 : halton(i, primes[a % 6]);
            p[a] = box.lo[a] + t * (box.hi[a] - box.lo[a]);
        }
        ++i;
        if (box.contains(p)) pts.push_back(p);
        if (i > 100 * count) break;
    }
    return pts;
}

}  // namespace

RegularizationFamily build_regularization_family(const MetricField& base,
                                                 std::vector<double> eps_list,
                                                 const BackgroundMetric& h,
                                                 int verify_points, int cone_samples,
                                                 uint64_t seed, const MollifyOptions& mopts) {
    (void)seed;
    if (eps_list.empty()) throw InvalidInput("family: empty eps list");
    for (size_t i = 0; i + 1 < eps_list.size(); ++i)
        if (!(eps_list[i] > eps_list[i + 1]) || eps_list.back() <= 0)
            throw InvalidInput("family: eps list must be strictly decreasing and positive");

    RegularizationFamily fam;
    fam.base = base;
    fam.h = h;
    fam.eps_list = eps_list;
    for (double e : eps_list) fam.mollified.push_back(mollify(base, e, mopts));

    // Verification points inside the most-shrunk domain (largest eps).
    Box vbox = fam.mollified.front().domain;
    // stay clear of spline boundary effects
    for (int a = 0; a < vbox.dim(); ++a) {
        const double pad = 0.02 * (vbox.hi[a] - vbox.lo[a]);
        vbox.lo[a] += pad;
        vbox.hi[a] -= pad;
    }
    if (vbox.exclusion_radius > 0) vbox.exclusion_radius *= 1.1;
    fam.verification_points = halton_points_in_box(vbox, verify_points);

    // Initial coefficient: measured modulus sup|g*rho - g| / eps.
    double c0 = 0;
    for (size_t e = 0; e < eps_list.size(); ++e) {
        double sup = 0;
        MatN gm(base.dim), gb(base.dim);
        for (const VecN& x : fam.verification_points) {
            fam.mollified[e].components(x, gm);
            base.components(x, gb);
            sup = std::max(sup, max_abs(gm - gb));
        }
        c0 = std::max(c0, sup / eps_list[e]);
    }
    double c_corr = std::max(c0, 1e-3);

    for (int attempt = 0; attempt < 20; ++attempt) {
        fam.c_corr = c_corr;
        bool ok = true;
        try {
            for (size_t e = 0; e < eps_list.size() && ok; ++e) {
                MetricField gn = narrow_member(fam, eps_list[e]);
                MetricField gw = widen_member(fam, eps_list[e]);
                for (const VecN& x : fam.verification_points) {
                    if (cone_compare(gn, base, x, cone_samples, h) != ConeOrder::kNarrower ||
                        cone_compare(base, gw, x, cone_samples, h) != ConeOrder::kNarrower) {
                        ok = false;
                        break;
                    }
                }
            }
        } catch (const InvalidMetric&) {
            ok = false;
        }
        if (ok) return fam;
        c_corr *= 2.0;
    }
    throw CalibrationError("regularization family: cone nesting calibration failed after 20 doublings");
}

MetricField narrow_member(const RegularizationFamily& family, double eps) {
    for (size_t e = 0; e < family.eps_list.size(); ++e)
        if (family.eps_list[e] == eps)
            return corrected_member(family.mollified[e], family.base,
                                    family.c_corr * eps, +1.0, "~check");
    throw InvalidInput("narrow_member: eps not in family list");
}

MetricField widen_member(const RegularizationFamily& family, double eps) {
    for (size_t e = 0; e < family.eps_list.size(); ++e)
        if (family.eps_list[e] == eps)
            return corrected_member(family.mollified[e], family.base,
                                    family.c_corr * eps, -1.0, "~hat");
    throw InvalidInput("widen_member: eps not in family list");
}

ConvergenceReport convergence_report(const RegularizationFamily& family, const Box& K,
                                     int samples_per_axis) {
    const MetricField& base = family.base;
    const int n = base.dim;

    // Sample set: dense sweep along each dependent axis plus Halton points.
    std::vector<VecN> pts;
    Box kbox = K;
    for (int a = 0; a < n; ++a) {
        kbox.lo[a] = std::max(K.lo[a], family.mollified.front().domain.lo[a]);
        kbox.hi[a] = std::min(K.hi[a], family.mollified.front().domain.hi[a]);
        const double pad = 0.02 * (kbox.hi[a] - kbox.lo[a]);
        kbox.lo[a] += pad;
        kbox.hi[a] -= pad;
    }
    kbox.exclusion_radius = std::max(
        K.exclusion_radius, family.mollified.front().domain.exclusion_radius * 1.1);
    VecN mid(n);
    for (int a = 0; a < n; ++a) mid[a] = 0.5 * (kbox.lo[a] + kbox.hi[a]);
    for (int a = 0; a < n; ++a) {
        if (!base.depends_on(a)) continue;
        for (int i = 0; i < samples_per_axis; ++i) {
            VecN p = mid;
            p[a] = kbox.lo[a] + (kbox.hi[a] - kbox.lo[a]) * i / (samples_per_axis - 1.0);
            if (kbox.contains(p)) pts.push_back(p);
        }
    }
    for (const VecN& p : halton_points_in_box(kbox, 512)) pts.push_back(p);

    ConvergenceReport rep;
    MatN gm(n), gb(n), gn(n), gw(n);
    Deriv3 dm(n), db(n), dn(n);
    for (size_t e = 0; e < family.eps_list.size(); ++e) {
        const double eps = family.eps_list[e];
        const MetricField& moll = family.mollified[e];
        MetricField narrow = narrow_member(family, eps);
        MetricField widen = widen_member(family, eps);
        ConvergenceRow row;
        row.eps = eps;
        for (const VecN& x : pts) {
            moll.components(x, gm);
            base.components(x, gb);
            narrow.components(x, gn);
            widen.components(x, gw);
            row.sup_narrow_minus_moll = std::max(row.sup_narrow_minus_moll, max_abs(gn - gm));
            row.sup_widen_minus_moll = std::max(row.sup_widen_minus_moll, max_abs(gw - gm));
            row.sup_moll_minus_base = std::max(row.sup_moll_minus_base, max_abs(gm - gb));
            row.sup_narrow_minus_base = std::max(row.sup_narrow_minus_base, max_abs(gn - gb));
            moll.derivs(x, dm);
            db = metric_first_derivs(base, x);
            narrow.derivs(x, dn);
            for (int k = 0; k < n; ++k)
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) {
                        row.sup_dmoll_minus_dbase = std::max(
                            row.sup_dmoll_minus_dbase, std::abs(dm(k, i, j) - db(k, i, j)));
                        row.sup_dnarrow_minus_dbase =
                            std::max(row.sup_dnarrow_minus_dbase,
                                     std::abs(dn(k, i, j) - db(k, i, j)));
                    }
        }
        row.ratio_narrow = row.sup_narrow_minus_moll / eps;
        row.ratio_widen = row.sup_widen_minus_moll / eps;
        rep.rows.push_back(row);
    }

    rep.c_K = 0;
    for (const auto& r : rep.rows) rep.c_K = std::max(rep.c_K, r.ratio_narrow);
    rep.ratios_bounded = true;
    for (const auto& r : rep.rows)
        if (r.ratio_narrow > rep.c_K * 1.05 || r.ratio_widen > rep.c_K * 1.05)
            rep.ratios_bounded = false;

    rep.c0_converges =
        rep.rows.back().sup_narrow_minus_base < rep.rows.front().sup_narrow_minus_base / 4.0;

    // Representation floor: spline the base at a negligible smoothing width
    // and measure its derivative error on the same samples. Only meaningful
    // when no axis carries a kink (kinked axes refine with eps).
    bool kinked = false;
    for (const auto& kp : base.kink_planes) kinked = kinked || !kp.empty();
    if (!kinked && base.regularity == Regularity::kSmooth && !base.constant()) {
        MetricField tiny = mollify(base, family.eps_list.back() / 64.0);
        Deriv3 dt_(n), db2(n);
        for (const VecN& x : pts) {
            if (!tiny.domain.contains(x)) continue;
            tiny.derivs(x, dt_);
            db2 = metric_first_derivs(base, x);
            for (int k = 0; k < n; ++k)
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        rep.c1_floor =
                            std::max(rep.c1_floor, std::abs(dt_(k, i, j) - db2(k, i, j)));
        }
    }

    rep.c1_monotone = true;
    for (size_t i = 0; i + 1 < rep.rows.size(); ++i) {
        const double prev = rep.rows[i].sup_dnarrow_minus_dbase;
        const double next = rep.rows[i + 1].sup_dnarrow_minus_dbase;
        if (next > std::max(prev * 1.05, 1.5 * rep.c1_floor)) rep.c1_monotone = false;
    }
    rep.pass = rep.ratios_bounded && rep.c0_converges && rep.c1_monotone;
    return rep;
}

void write_convergence_csv(const std::string& path, const ConvergenceReport& rep,
                           const std::string& scenario_id, const std::string& version) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw ConfigError("cannot open " + path);
    std::fprintf(f,
                 "scenario,version,eps,sup_check_minus_moll,sup_hat_minus_moll,"
                 "sup_moll_minus_base,sup_dmoll_minus_dbase,sup_check_minus_base,"
                 "sup_dcheck_minus_dbase,ratio_check,ratio_hat,pass\n");
    for (const auto& r : rep.rows)
        std::fprintf(f, "%s,%s,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%d\n",
                     scenario_id.c_str(), version.c_str(), r.eps, r.sup_narrow_minus_moll,
                     r.sup_widen_minus_moll, r.sup_moll_minus_base, r.sup_dmoll_minus_dbase,
                     r.sup_narrow_minus_base, r.sup_dnarrow_minus_dbase, r.ratio_narrow,
                     r.ratio_widen, rep.pass ? 1 : 0);
    std::fclose(f);
}

}  // namespace conelab
