#include "conelab/chart_metric.hpp"

#include <algorithm>
#include <cmath>

#include "conelab/errors.hpp"

namespace conelab {

const char* to_string(CausalCharacter c) {
    switch (c) {
        case CausalCharacter::kTimelike: return "timelike";
        case CausalCharacter::kNull: return "null";
        case CausalCharacter::kSpacelike: return "spacelike";
    }
    return "?";
}

const char* to_string(Regularity r) {
    switch (r) {
        case Regularity::kSmooth: return "smooth";
        case Regularity::kC11: return "C11";
        case Regularity::kC1: return "C1";
    }
    return "?";
}

double fd_step(const MetricField& field) {
    const double eps_cbrt = std::cbrt(2.220446049250313e-16);
    return std::max(1e-4, eps_cbrt * field.fd_scale);
}

MatN eval_metric_raw(const MetricField& field, const VecN& x) {
    MatN g(field.dim);
    field.components(x, g);
    return g;
}

MatN eval_metric(const MetricField& field, const VecN& x) {
    if (!field.domain.contains(x))
        throw DomainError("eval_metric: point outside chart domain of " + field.name);
    MatN g = eval_metric_raw(field, x);
    for (int i = 0; i < g.n; ++i)
        for (int j = i + 1; j < g.n; ++j)
            if (std::abs(g(i, j) - g(j, i)) > 1e-12)
                throw InvalidMetric("eval_metric: asymmetric components in " + field.name);
    if (!has_lorentzian_signature(g))
        throw InvalidMetric("eval_metric: signature violation in " + field.name);
    return g;
}

bool has_lorentzian_signature(const MatN& g, double tol) {
    VecN ev = sym_eigenvalues(g);
    int neg = 0, pos = 0;
    for (int i = 0; i < ev.n; ++i) {
        if (ev[i] < -tol) ++neg;
        else if (ev[i] > tol) ++pos;
        else return false;
    }
    return neg == 1 && pos == g.n - 1;
}

Deriv3 metric_first_derivs(const MetricField& field, const VecN& x) {
    if (field.derivs) {
        Deriv3 d(field.dim);
        field.derivs(x, d);
        return d;
    }
    Deriv3 d(field.dim);
    const double h = fd_step(field);
    MatN gp, gm, gp2, gm2;
    for (int k = 0; k < field.dim; ++k) {
        if (!field.depends_on(k)) continue;
        VecN xs = x;
        xs[k] = x[k] + h;
        gp = eval_metric_raw(field, xs);
        xs[k] = x[k] - h;
        gm = eval_metric_raw(field, xs);
        xs[k] = x[k] + 2 * h;
        gp2 = eval_metric_raw(field, xs);
        xs[k] = x[k] - 2 * h;
        gm2 = eval_metric_raw(field, xs);
        for (int i = 0; i < field.dim; ++i)
            for (int j = 0; j < field.dim; ++j)
                d(k, i, j) = (8.0 * (gp(i, j) - gm(i, j)) - (gp2(i, j) - gm2(i, j))) / (12.0 * h);
    }
    return d;
}

CausalCharacter causal_character(const MetricField& field, const TangentVector& v,
                                 double tol) {
    if (!field.domain.contains(v.base_point))
        throw DomainError("causal_character: base point outside chart");
    double vv = 0;
    for (int i = 0; i < v.components.n; ++i) vv += v.components[i] * v.components[i];
    if (vv == 0.0) throw InvalidInput("causal_character: zero vector");
    MatN g = eval_metric_raw(field, v.base_point);
    const double q = quad_form(g, v.components, v.components);
    if (std::abs(q) <= tol) return CausalCharacter::kNull;
    return q < 0 ? CausalCharacter::kTimelike : CausalCharacter::kSpacelike;
}

bool is_future_directed(const MetricField& field, const TangentVector& v) {
    MatN g = eval_metric_raw(field, v.base_point);
    VecN u = field.future_at(v.base_point);
    return quad_form(g, v.components, u) < 0;
}

std::vector<VecN> sphere_directions(int dim, int count, const BackgroundMetric& h) {
    const int s = dim - 1;
    std::vector<VecN> dirs;
    dirs.reserve(static_cast<size_t>(count));
    if (s == 2) {
        for (int i = 0; i < count; ++i) {
            const double phi = 2.0 * M_PI * (i + 0.5) / count;
            VecN u(dim);
            u[1] = std::cos(phi);
            u[2] = std::sin(phi);
            dirs.push_back(u);
        }
    } else if (s == 3) {
        // Fibonacci sphere
        const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
        for (int i = 0; i < count; ++i) {
            const double z = 1.0 - 2.0 * (i + 0.5) / count;
            const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double phi = 2.0 * M_PI * i / golden;
            VecN u(dim);
            u[1] = rho * std::cos(phi);
            u[2] = rho * std::sin(phi);
            u[3] = z;
            dirs.push_back(u);
        }
    } else {
        // Halton-style lattice, normalized.
        auto halton = [](int idx, int base) {
            double f = 1.0, r = 0.0;
            while (idx > 0) {
                f /= base;
                r += f * (idx % base);
                idx /= base;
            }
            return r;
        };
        const int primes[5] = {2, 3, 5, 7, 11};
        for (int i = 0; i < count; ++i) {
            VecN u(dim);
            double nrm = 0;
            for (int k = 1; k < dim; ++k) {
                u[k] = 2.0 * halton(i + 1, primes[(k - 1) % 5]) - 1.0;
                nrm += u[k] * u[k];
            }
            if (nrm < 1e-12) u[1] = 1.0;
            dirs.push_back(u);
        }
    }
    for (VecN& u : dirs) {
        const double nh = h.norm(u);
        u *= 1.0 / nh;
    }
    return dirs;
}

double null_time_component(const MatN& g, const VecN& u) {
    // g(tau e0 + u, tau e0 + u) = a tau^2 + 2 b tau + c
    const double a = g(0, 0);
    double b = 0, c = 0;
    for (int i = 1; i < g.n; ++i) b += g(0, i) * u[i];
    for (int i = 1; i < g.n; ++i)
        for (int j = 1; j < g.n; ++j) c += g(i, j) * u[i] * u[j];
    if (a >= 0.0)
        throw InvalidMetric("null_time_component: e_0 not timelike at this point");
    const double disc = b * b - a * c;
    if (disc < 0.0) throw InvalidMetric("null_time_component: no real null cone crossing");
    const double sq = std::sqrt(disc);
    // a < 0, c > 0: roots have opposite signs; the future one is positive.
    const double tau = (-b - sq) / a;
    return tau;
}

VecN null_cone_vector(const MatN& g, const VecN& fut, const VecN& u) {
    const double a = quad_form(g, fut, fut);
    if (a >= 0.0) throw InvalidMetric("null_cone_vector: future field not timelike");
    const double b = quad_form(g, fut, u);
    const double c = quad_form(g, u, u);
    if (c <= 0.0) throw InvalidMetric("null_cone_vector: direction not spacelike");
    const double disc = b * b - a * c;
    const double tau = (-b - std::sqrt(disc)) / a;  // positive root
    VecN X = u;
    for (int i = 0; i < g.n; ++i) X[i] += tau * fut[i];
    return X;
}

ConeOrder cone_compare(const MetricField& g1, const MetricField& g2, const VecN& x,
                       int samples, const BackgroundMetric& h) {
    if (samples < 100) throw InvalidInput("cone_compare: samples must be >= 100");
    if (!g1.domain.contains(x) || !g2.domain.contains(x))
        throw DomainError("cone_compare: point outside a chart domain");
    MatN m1 = eval_metric_raw(g1, x);
    MatN m2 = eval_metric_raw(g2, x);
    if (!has_lorentzian_signature(m1) || !has_lorentzian_signature(m2))
        throw InvalidMetric("cone_compare: signature violation");
    VecN fut = g1.future_at(x);
    const std::vector<VecN> dirs = sphere_directions(g1.dim, samples, h);
    for (const VecN& u : dirs) {
        VecN X = null_cone_vector(m1, fut, u);
        if (quad_form(m2, X, X) >= 0.0) return ConeOrder::kNotNarrower;
    }
    return ConeOrder::kNarrower;
}

// ---------------------------------------------------------------------------

static Box centered_box(int dim, double half_width, double exclusion = 0.0) {
    Box b;
    b.lo = VecN(dim);
    b.hi = VecN(dim);
    for (int i = 0; i < dim; ++i) {
        b.lo[i] = -half_width;
        b.hi[i] = half_width;
    }
    b.exclusion_radius = exclusion;
    return b;
}

MetricField make_minkowski(int dim, double box_half_width) {
    MetricField f;
    f.dim = dim;
    f.domain = centered_box(dim, box_half_width);
    f.regularity = Regularity::kSmooth;
    f.name = "minkowski";
    f.dependence_mask = 0;
    f.kink_planes.assign(dim, {});
    f.components = [dim](const VecN&, MatN& g) {
        g = MatN(dim);
        g(0, 0) = -1.0;
        for (int i = 1; i < dim; ++i) g(i, i) = 1.0;
    };
    f.derivs = [dim](const VecN&, Deriv3& d) { d = Deriv3(dim); };
    return f;
}

MetricField make_c1_model(double box_half_width) {
    MetricField f;
    f.dim = 4;
    f.domain = centered_box(4, box_half_width);
    f.regularity = Regularity::kC1;
    f.name = "c1-model";
    f.dependence_mask = 1u << 1;
    f.kink_planes.assign(4, {});
    f.kink_planes[1] = {0.0};
    f.components = [](const VecN& x, MatN& g) {
        g = MatN(4);
        g(0, 0) = -1.0;
        g(1, 1) = 1.0 + std::pow(std::abs(x[1]), 1.5);
        g(2, 2) = 1.0;
        g(3, 3) = 1.0;
    };
    f.derivs = [](const VecN& x, Deriv3& d) {
        d = Deriv3(4);
        const double s = x[1] >= 0 ? 1.0 : -1.0;
        d(1, 1, 1) = 1.5 * std::sqrt(std::abs(x[1])) * s;
    };
    return f;
}

MetricField make_c11_model(double box_half_width) {
    MetricField f;
    f.dim = 4;
    f.domain = centered_box(4, box_half_width);
    f.regularity = Regularity::kC11;
    f.name = "c11-model";
    f.dependence_mask = 1u << 1;
    f.kink_planes.assign(4, {});
    f.kink_planes[1] = {0.0};
    f.components = [](const VecN& x, MatN& g) {
        g = MatN(4);
        g(0, 0) = -1.0;
        g(1, 1) = 1.0 + x[1] * std::abs(x[1]);
        g(2, 2) = 1.0;
        g(3, 3) = 1.0;
    };
    f.derivs = [](const VecN& x, Deriv3& d) {
        d = Deriv3(4);
        d(1, 1, 1) = 2.0 * std::abs(x[1]);
    };
    return f;
}

MetricField make_schwarzschild_spherical(double mass, double r_min, double r_max) {
    MetricField f;
    f.dim = 4;
    f.domain.lo = VecN{-8.0, r_min, 0.4, -2.6};
    f.domain.hi = VecN{8.0, r_max, 2.7, 2.6};
    f.regularity = Regularity::kSmooth;
    f.name = "schwarzschild-spherical";
    f.dependence_mask = (1u << 1) | (1u << 2);
    f.kink_planes.assign(4, {});
    const double m = mass;
    f.components = [m](const VecN& x, MatN& g) {
        const double r = x[1], th = x[2];
        const double fr = 1.0 - 2.0 * m / r;
        g = MatN(4);
        g(0, 0) = -fr;
        g(1, 1) = 1.0 / fr;
        g(2, 2) = r * r;
        g(3, 3) = r * r * std::sin(th) * std::sin(th);
    };
    f.derivs = [m](const VecN& x, Deriv3& d) {
        const double r = x[1], th = x[2];
        const double fr = 1.0 - 2.0 * m / r;
        const double dfr = 2.0 * m / (r * r);
        d = Deriv3(4);
        d(1, 0, 0) = -dfr;
        d(1, 1, 1) = -dfr / (fr * fr);
        d(1, 2, 2) = 2.0 * r;
        d(1, 3, 3) = 2.0 * r * std::sin(th) * std::sin(th);
        d(2, 3, 3) = r * r * 2.0 * std::sin(th) * std::cos(th);
    };
    return f;
}

MetricField make_schwarzschild_cartesian(double mass, double box_half_width,
                                         double exclusion_radius) {
    MetricField f;
    f.dim = 4;
    f.domain = centered_box(4, box_half_width, exclusion_radius);
    // allow long time spans for ray crossings
    f.domain.lo[0] = -4.0 * box_half_width;
    f.domain.hi[0] = 4.0 * box_half_width;
    f.regularity = Regularity::kSmooth;
    f.name = "schwarzschild-cartesian";
    f.dependence_mask = (1u << 1) | (1u << 2) | (1u << 3);
    f.kink_planes.assign(4, {});
    f.fd_scale = box_half_width / 8.0;
    const double m = mass;
    // g_00 = -(1-2m/r), g_ij = delta_ij + (2m/r)/(1-2m/r) x_i x_j / r^2
    f.components = [m](const VecN& x, MatN& g) {
        const double r2 = x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
        const double r = std::sqrt(r2);
        const double fr = 1.0 - 2.0 * m / r;
        const double w = (2.0 * m / r) / (fr * r2);
        g = MatN(4);
        g(0, 0) = -fr;
        for (int i = 1; i < 4; ++i) {
            for (int j = 1; j < 4; ++j) g(i, j) = w * x[i] * x[j];
            g(i, i) += 1.0;
        }
    };
    f.derivs = [m](const VecN& x, Deriv3& d) {
        const double r2 = x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
        const double r = std::sqrt(r2);
        const double fr = 1.0 - 2.0 * m / r;
        const double w = (2.0 * m / r) / (fr * r2);
        // dw/dr = d/dr [ 2m / (r^3 - 2m r^2) ] = -2m (3r^2 - 4mr) / (r^3-2mr^2)^2
        const double den = r2 * r - 2.0 * m * r2;
        const double dwdr = -2.0 * m * (3.0 * r2 - 4.0 * m * r) / (den * den);
        d = Deriv3(4);
        for (int k = 1; k < 4; ++k) {
            const double drdk = x[k] / r;
            d(k, 0, 0) = -(2.0 * m / r2) * drdk;
            for (int i = 1; i < 4; ++i)
                for (int j = 1; j < 4; ++j) {
                    double v = dwdr * drdk * x[i] * x[j];
                    if (i == k) v += w * x[j];
                    if (j == k) v += w * x[i];
                    d(k, i, j) = v;
                }
        }
    };
    return f;
}

MetricField make_painleve_gullstrand(double mass, double box_half_width,
                                     double exclusion_radius) {
    MetricField f;
    f.dim = 4;
    f.domain = centered_box(4, box_half_width, exclusion_radius);
    f.regularity = Regularity::kSmooth;
    f.name = "pg";
    f.dependence_mask = (1u << 1) | (1u << 2) | (1u << 3);
    f.kink_planes.assign(4, {});
    f.fd_scale = box_half_width / 8.0;
    const double m = mass;
    // ds^2 = -(1-2m/r) dt^2 + 2 sqrt(2m/r) (x_i/r) dt dx_i + delta_ij dx_i dx_j
    f.components = [m](const VecN& x, MatN& g) {
        const double r2 = x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
        const double r = std::sqrt(r2);
        const double beta = std::sqrt(2.0 * m / r);
        g = MatN(4);
        g(0, 0) = -(1.0 - 2.0 * m / r);
        for (int i = 1; i < 4; ++i) {
            g(0, i) = g(i, 0) = beta * x[i] / r;
            g(i, i) = 1.0;
        }
    };
    f.derivs = [m](const VecN& x, Deriv3& d) {
        const double r2 = x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
        const double r = std::sqrt(r2);
        const double beta = std::sqrt(2.0 * m / r);
        // d beta/dr = -beta/(2r);  g_0i = beta x_i / r
        d = Deriv3(4);
        for (int k = 1; k < 4; ++k) {
            const double drdk = x[k] / r;
            d(k, 0, 0) = -(2.0 * m / r2) * drdk;
            for (int i = 1; i < 4; ++i) {
                // d/dx_k [beta(r) x_i/r]; dbeta/dr = -beta/(2r)
                const double v = (-beta / (2.0 * r)) * drdk * (x[i] / r) +
                                 beta * ((i == k ? 1.0 : 0.0) / r - x[i] * x[k] / (r2 * r));
                d(k, 0, i) = d(k, i, 0) = v;
            }
        }
    };
    // Future orientation: dt is not timelike inside the horizon; use the
    // infalling unit normal U = e_0 - beta x^i/r e_i.
    f.future_field = [m](const VecN& x, VecN& u) {
        const double r = std::sqrt(x[1] * x[1] + x[2] * x[2] + x[3] * x[3]);
        const double beta = std::sqrt(2.0 * m / r);
        u = VecN(4);
        u[0] = 1.0;
        for (int i = 1; i < 4; ++i) u[i] = -beta * x[i] / r;
    };
    return f;
}

MetricField make_sphere_block() {
    MetricField f;
    f.dim = 4;
    f.domain.lo = VecN{-4.0, 0.4, -0.5, -4.0};
    f.domain.hi = VecN{4.0, 2.7, 2.0 * M_PI + 0.5, 4.0};
    f.regularity = Regularity::kSmooth;
    f.name = "sphere-block";
    f.dependence_mask = 1u << 1;
    f.kink_planes.assign(4, {});
    f.components = [](const VecN& x, MatN& g) {
        const double th = x[1];
        g = MatN(4);
        g(0, 0) = -1.0;
        g(1, 1) = 1.0;
        g(2, 2) = std::sin(th) * std::sin(th);
        g(3, 3) = 1.0;
    };
    f.derivs = [](const VecN& x, Deriv3& d) {
        const double th = x[1];
        d = Deriv3(4);
        d(1, 2, 2) = 2.0 * std::sin(th) * std::cos(th);
    };
    return f;
}

MetricField make_s3_block() {
    MetricField f;
    f.dim = 4;
    f.domain.lo = VecN{-4.0, 0.4, 0.4, -2.6};
    f.domain.hi = VecN{4.0, 2.7, 2.7, 2.6};
    f.regularity = Regularity::kSmooth;
    f.name = "s3-block";
    f.dependence_mask = (1u << 1) | (1u << 2);
    f.kink_planes.assign(4, {});
    f.components = [](const VecN& x, MatN& g) {
        const double chi = x[1], th = x[2];
        g = MatN(4);
        g(0, 0) = -1.0;
        g(1, 1) = 1.0;
        g(2, 2) = std::sin(chi) * std::sin(chi);
        g(3, 3) = std::sin(chi) * std::sin(chi) * std::sin(th) * std::sin(th);
    };
    f.derivs = [](const VecN& x, Deriv3& d) {
        const double chi = x[1], th = x[2];
        const double sc = std::sin(chi), cc = std::cos(chi);
        const double st = std::sin(th), ct = std::cos(th);
        d = Deriv3(4);
        d(1, 2, 2) = 2.0 * sc * cc;
        d(1, 3, 3) = 2.0 * sc * cc * st * st;
        d(2, 3, 3) = sc * sc * 2.0 * st * ct;
    };
    return f;
}

MetricField make_nec_violator(double box_half_width) {
    MetricField f;
    f.dim = 4;
    f.domain = centered_box(4, box_half_width);
    f.regularity = Regularity::kSmooth;
    f.name = "nec-violator";
    f.dependence_mask = 1u << 0;
    f.kink_planes.assign(4, {});
    f.components = [](const VecN& x, MatN& g) {
        const double a2 = std::exp(2.0 * x[0] * x[0]);
        g = MatN(4);
        g(0, 0) = -1.0;
        for (int i = 1; i < 4; ++i) g(i, i) = a2;
    };
    f.derivs = [](const VecN& x, Deriv3& d) {
        const double a2 = std::exp(2.0 * x[0] * x[0]);
        d = Deriv3(4);
        for (int i = 1; i < 4; ++i) d(0, i, i) = 4.0 * x[0] * a2;
    };
    return f;
}

MetricField make_from_closures(int dim, Box domain, Regularity reg, std::string name,
                               std::function<void(const VecN&, MatN&)> comps,
                               std::function<void(const VecN&, Deriv3&)> derivs,
                               uint32_t dependence_mask) {
    MetricField f;
    f.dim = dim;
    f.domain = std::move(domain);
    f.regularity = reg;
    f.name = std::move(name);
    f.components = std::move(comps);
    f.derivs = std::move(derivs);
    f.dependence_mask = dependence_mask;
    f.kink_planes.assign(dim, {});
    return f;
}

}  // namespace conelab
