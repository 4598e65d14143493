#include "conelab/curvature.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>

#include "conelab/errors.hpp"

namespace conelab {

ChristoffelAt christoffel(const MetricField& field, const VecN& x) {
    if (!field.domain.contains(x))
        throw DomainError("christoffel: point outside chart domain");
    const int n = field.dim;
    MatN g = eval_metric_raw(field, x);
    MatN ginv = inverse(g);
    Deriv3 d = metric_first_derivs(field, x);
    ChristoffelAt out(n);
    out.point = x;
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                double s = 0;
                for (int l = 0; l < n; ++l)
                    s += ginv(k, l) * (d(i, l, j) + d(j, l, i) - d(l, i, j));
                s *= 0.5;
                out(k, i, j) = s;
                out(k, j, i) = s;
            }
    return out;
}

namespace {

// d_a Gamma^k_ij by 4th-order central differences, only along dependent axes.
struct GammaDerivs {
    int n;
    std::vector<double> d;  // (a, k, i, j)
    double& at(int a, int k, int i, int j) {
        return d[static_cast<size_t>(((a * n + k) * n + i) * n + j)];
    }
    double at(int a, int k, int i, int j) const {
        return d[static_cast<size_t>(((a * n + k) * n + i) * n + j)];
    }
};

GammaDerivs christoffel_derivs(const MetricField& field, const VecN& x, double h) {
    const int n = field.dim;
    GammaDerivs gd{n, std::vector<double>(static_cast<size_t>(n) * n * n * n, 0.0)};
    for (int a = 0; a < n; ++a) {
        if (!field.depends_on(a)) continue;
        VecN xs = x;
        xs[a] = x[a] + h;
        ChristoffelAt gp = christoffel(field, xs);
        xs[a] = x[a] - h;
        ChristoffelAt gm = christoffel(field, xs);
        xs[a] = x[a] + 2 * h;
        ChristoffelAt gp2 = christoffel(field, xs);
        xs[a] = x[a] - 2 * h;
        ChristoffelAt gm2 = christoffel(field, xs);
        for (int k = 0; k < n; ++k)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    gd.at(a, k, i, j) =
                        (8.0 * (gp(k, i, j) - gm(k, i, j)) - (gp2(k, i, j) - gm2(k, i, j))) /
                        (12.0 * h);
    }
    return gd;
}

void require_smooth(const MetricField& field, const char* op) {
    if (field.regularity != Regularity::kSmooth)
        throw RegularityError(std::string(op) +
                              ": second derivatives need a smooth field; mollify first or "
                              "use the distributional pairing");
}

}  // namespace

RiemannAt riemann(const MetricField& field, const VecN& x, double fd_step) {
    require_smooth(field, "riemann");
    if (!field.domain.contains(x, 2.5 * fd_step))
        throw DomainError("riemann: FD stencil leaves chart domain");
    const int n = field.dim;
    ChristoffelAt G = christoffel(field, x);
    GammaDerivs dG = christoffel_derivs(field, x, fd_step);
    RiemannAt out(n);
    out.point = x;
    for (int m = 0; m < n; ++m)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    double s = dG.at(j, m, i, k) - dG.at(k, m, i, j);
                    for (int l = 0; l < n; ++l)
                        s += G(m, j, l) * G(l, i, k) - G(m, k, l) * G(l, i, j);
                    out(m, i, j, k) = s;
                }
    return out;
}

RicciAt ricci(const MetricField& field, const VecN& x, double fd_step) {
    require_smooth(field, "ricci");
    if (!field.domain.contains(x, 2.5 * fd_step))
        throw DomainError("ricci: FD stencil leaves chart domain");
    const int n = field.dim;
    ChristoffelAt G = christoffel(field, x);
    GammaDerivs dG = christoffel_derivs(field, x, fd_step);
    RicciAt out;
    out.point = x;
    out.ric = MatN(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0;
            for (int m = 0; m < n; ++m) s += dG.at(m, m, i, j) - dG.at(j, m, i, m);
            for (int m = 0; m < n; ++m)
                for (int k = 0; k < n; ++k)
                    s += G(m, i, j) * G(k, k, m) - G(m, i, k) * G(k, j, m);
            out.ric(i, j) = s;
        }
    return out;
}

// ---------------------------------------------------------------------------

double TestBump::value(const VecN& x) const {
    double s2 = 0;
    for (int i = 0; i < x.n; ++i) {
        const double d = (x[i] - center[i]) / radius;
        s2 += d * d;
    }
    if (s2 >= 1.0) return 0.0;
    const double w = 1.0 - s2;
    return w * w * w * w;
}

VecN TestBump::gradient(const VecN& x) const {
    VecN g(x.n);
    double s2 = 0;
    for (int i = 0; i < x.n; ++i) {
        const double d = (x[i] - center[i]) / radius;
        s2 += d * d;
    }
    if (s2 >= 1.0) return g;
    const double w = 1.0 - s2;
    const double f = 4.0 * w * w * w * (-2.0 / (radius * radius));
    for (int i = 0; i < x.n; ++i) g[i] = f * (x[i] - center[i]);
    return g;
}

double TestBump::mass() const {
    // int_{B_1} (1-|y|^2)^4 dy * radius^n; radial closed form via Beta.
    const int n = center.n;
    const double surf = 2.0 * std::pow(M_PI, n / 2.0) / std::tgamma(n / 2.0);
    // int_0^1 (1-r^2)^4 r^{n-1} dr = 1/2 B(n/2, 5)
    const double radial = 0.5 * std::tgamma(n / 2.0) * std::tgamma(5.0) /
                          std::tgamma(n / 2.0 + 5.0);
    return surf * radial * std::pow(radius, n);
}

// ---------------------------------------------------------------------------

namespace {

struct GlRule {
    std::vector<double> nodes, weights;
};

const GlRule& gl_rule(int order) {
    static std::map<int, GlRule> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(order);
    if (it == cache.end()) {
        GlRule rule;
        rule.nodes.resize(static_cast<size_t>(order));
        rule.weights.resize(static_cast<size_t>(order));
        auto legendre = [order](double x, double& p, double& dp) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= order; ++k) {
                const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            p = p1;
            dp = order * (x * p1 - p0) / (x * x - 1.0);
        };
        for (int i = 0; i < order; ++i) {
            // Newton from Chebyshev initial guess.
            double x = std::cos(M_PI * (i + 0.75) / (order + 0.5));
            double p, dp;
            for (int iter = 0; iter < 100; ++iter) {
                legendre(x, p, dp);
                const double dx = p / dp;
                x -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            legendre(x, p, dp);
            rule.nodes[static_cast<size_t>(i)] = x;
            rule.weights[static_cast<size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        it = cache.emplace(order, std::move(rule)).first;
    }
    return it->second;
}

}  // namespace

const std::vector<double>& gl_nodes(int order) { return gl_rule(order).nodes; }

const std::vector<double>& gl_weights(int order) { return gl_rule(order).weights; }

namespace {

// Tensor-product Gauss-Legendre integration over the support cube of mu,
// clipped to the chart.
template <typename F>
double bump_quadrature(const MetricField& field, const TestBump& mu, int order, F&& fn) {
    const int n = field.dim;
    const auto& xs = gl_nodes(order);
    const auto& ws = gl_weights(order);
    VecN lo(n), hi(n);
    for (int i = 0; i < n; ++i) {
        lo[i] = std::max(mu.center[i] - mu.radius, field.domain.lo[i]);
        hi[i] = std::min(mu.center[i] + mu.radius, field.domain.hi[i]);
        if (lo[i] >= hi[i]) throw DomainError("bump support does not meet chart domain");
    }
    std::vector<int> idx(static_cast<size_t>(n), 0);
    double total = 0;
    bool done = false;
    VecN p(n);
    while (!done) {
        double w = 1.0;
        for (int i = 0; i < n; ++i) {
            const double half = 0.5 * (hi[i] - lo[i]);
            p[i] = lo[i] + half * (1.0 + xs[static_cast<size_t>(idx[static_cast<size_t>(i)])]);
            w *= half * ws[static_cast<size_t>(idx[static_cast<size_t>(i)])];
        }
        total += w * fn(p);
        int d = 0;
        while (d < n) {
            if (++idx[static_cast<size_t>(d)] < order) break;
            idx[static_cast<size_t>(d)] = 0;
            ++d;
        }
        done = (d == n);
    }
    return total;
}

}  // namespace

double distributional_ricci_pairing(const MetricField& field, const SmoothVectorField& X,
                                    const TestBump& mu, int quad_order) {
    for (int i = 0; i < field.dim; ++i) {
        if (mu.center[i] - mu.radius < field.domain.lo[i] ||
            mu.center[i] + mu.radius > field.domain.hi[i])
            throw DomainError("distributional_ricci_pairing: bump support escapes chart");
    }
    const int n = field.dim;
    return bump_quadrature(field, mu, quad_order, [&](const VecN& p) {
        const double m = mu.value(p);
        VecN gm = mu.gradient(p);
        VecN xv(n);
        X.value(p, xv);
        MatN xj(n);
        X.jacobian(p, xj);
        ChristoffelAt G = christoffel(field, p);

        // phi_ij = X^i X^j mu;  d_m phi_ij
        auto dphi = [&](int mm, int i, int j) {
            return (xj(i, mm) * xv[j] + xv[i] * xj(j, mm)) * m + xv[i] * xv[j] * gm[mm];
        };

        double acc = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                // -Gamma^m_ij d_m phi + Gamma^m_im d_j phi
                for (int mm = 0; mm < n; ++mm) {
                    acc -= G(mm, i, j) * dphi(mm, i, j);
                    acc += G(mm, i, mm) * dphi(j, i, j);
                }
                // Gamma Gamma terms times phi
                double gg = 0;
                for (int mm = 0; mm < n; ++mm)
                    for (int k = 0; k < n; ++k)
                        gg += G(mm, i, j) * G(k, k, mm) - G(mm, i, k) * G(k, j, mm);
                acc += gg * xv[i] * xv[j] * m;
            }
        return acc;
    });
}

double pointwise_ricci_quadrature(const MetricField& field, const SmoothVectorField& X,
                                  const TestBump& mu, int quad_order, double fd_step) {
    const int n = field.dim;
    return bump_quadrature(field, mu, quad_order, [&](const VecN& p) {
        const double m = mu.value(p);
        if (m == 0.0) return 0.0;
        VecN xv(n);
        X.value(p, xv);
        RicciAt r = ricci(field, p, fd_step);
        return quad_form(r.ric, xv, xv) * m;
    });
}

// ---------------------------------------------------------------------------

NecReport nec_surrogate_check(const MetricField& field_eps, const Box& K, double c1,
                              double c2, double delta, const BackgroundMetric& h,
                              int axis_samples, int directions, double fd_step) {
    if (!(0 < c1 && c1 < c2)) throw InvalidInput("nec_surrogate_check: need 0 < c1 < c2");
    require_smooth(field_eps, "nec_surrogate_check");
    const int n = field_eps.dim;

    // Lattice directions on the spatial axes (3^s - 1 of them, h-normalized).
    std::vector<VecN> dirs;
    {
        const int s = n - 1;
        std::vector<int> idx(static_cast<size_t>(s), 0);
        bool done = false;
        while (!done) {
            VecN u(n);
            bool nonzero = false;
            for (int i = 0; i < s; ++i) {
                u[i + 1] = idx[static_cast<size_t>(i)] - 1.0;
                if (u[i + 1] != 0.0) nonzero = true;
            }
            if (nonzero) {
                u *= 1.0 / h.norm(u);
                dirs.push_back(u);
                if (static_cast<int>(dirs.size()) >= directions) break;
            }
            int d = 0;
            while (d < s) {
                if (++idx[static_cast<size_t>(d)] < 3) break;
                idx[static_cast<size_t>(d)] = 0;
                ++d;
            }
            done = (d == s);
        }
    }

    NecReport rep;
    rep.delta = delta;
    rep.min_value = std::numeric_limits<double>::infinity();

    std::vector<std::vector<double>> axis_coords(static_cast<size_t>(n));
    const double fd_margin = 3.0 * fd_step;
    for (int a = 0; a < n; ++a) {
        const double lo = std::max(K.lo[a], field_eps.domain.lo[a] + fd_margin);
        const double hi = std::min(K.hi[a], field_eps.domain.hi[a] - fd_margin);
        const int count = field_eps.depends_on(a) ? axis_samples : 1;
        for (int i = 0; i < count; ++i)
            axis_coords[static_cast<size_t>(a)].push_back(
                count == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (count - 1));
    }

    std::vector<size_t> idx(static_cast<size_t>(n), 0);
    bool done = false;
    while (!done) {
        VecN p(n);
        for (int a = 0; a < n; ++a)
            p[a] = axis_coords[static_cast<size_t>(a)][idx[static_cast<size_t>(a)]];
        if (field_eps.domain.contains(p, fd_margin)) {
            MatN g = eval_metric_raw(field_eps, p);
            VecN fut = field_eps.future_at(p);
            RicciAt rc = ricci(field_eps, p, fd_step);
            for (const VecN& u : dirs) {
                VecN X = null_cone_vector(g, fut, u);
                double nh = h.norm(X);
                // rescale into [c1, c2]
                double target = (c1 <= 1.0 && 1.0 <= c2) ? 1.0 : 0.5 * (c1 + c2);
                X *= target / nh;
                const double q = quad_form(rc.ric, X, X);
                ++rep.num_samples;
                if (q < rep.min_value) {
                    rep.min_value = q;
                    rep.witness.point = p;
                    rep.witness.vector = X;
                    rep.witness.ric_xx = q;
                }
            }
        }
        int d = 0;
        while (d < n) {
            if (++idx[static_cast<size_t>(d)] < axis_coords[static_cast<size_t>(d)].size())
                break;
            idx[static_cast<size_t>(d)] = 0;
            ++d;
        }
        done = (d == n);
    }
    if (rep.num_samples == 0)
        throw InvalidInput("nec_surrogate_check: no admissible sample points in K");
    rep.pass = rep.min_value > -delta;
    return rep;
}

void write_nec_csv(const std::string& path, const std::vector<NecReport>& reports,
                   const std::string& scenario_id, const std::string& version) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw ConfigError("cannot open " + path);
    std::fprintf(f, "scenario,version,eps,delta,min_ric_xx,pass,witness_point,witness_vector\n");
    for (const NecReport& r : reports) {
        std::fprintf(f, "%s,%s,%.12g,%.12g,%.12g,%d,", scenario_id.c_str(), version.c_str(),
                     r.eps, r.delta, r.min_value, r.pass ? 1 : 0);
        for (int i = 0; i < r.witness.point.n; ++i)
            std::fprintf(f, "%s%.12g", i ? ";" : "", r.witness.point[i]);
        std::fprintf(f, ",");
        for (int i = 0; i < r.witness.vector.n; ++i)
            std::fprintf(f, "%s%.12g", i ? ";" : "", r.witness.vector[i]);
        std::fprintf(f, "\n");
    }
    std::fclose(f);
}

}  // namespace conelab
