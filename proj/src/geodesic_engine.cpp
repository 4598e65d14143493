#include "conelab/geodesic_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "conelab/errors.hpp"
#include "conelab/rng.hpp"

namespace conelab {

namespace {

// Dormand-Prince 5(4) coefficients.
const double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
const double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
const double kB5[7] = {35.0 / 384,      0.0,           500.0 / 1113, 125.0 / 192,
                       -2187.0 / 6784,  11.0 / 84,     0.0};
const double kB4[7] = {5179.0 / 57600,  0.0,           7571.0 / 16695, 393.0 / 640,
                       -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};

struct State {
    VecN x, v;
};

State axpy(const State& s, double a, const State& d) {
    State r = s;
    for (int i = 0; i < r.x.n; ++i) {
        r.x[i] += a * d.x[i];
        r.v[i] += a * d.v[i];
    }
    return r;
}

// gamma'' = -Gamma(v, v)
State geodesic_rhs(const MetricField& field, const State& s) {
    ChristoffelAt G = christoffel(field, s.x);
    State d;
    d.x = s.v;
    d.v = VecN(s.x.n);
    for (int k = 0; k < s.x.n; ++k) {
        double acc = 0;
        for (int i = 0; i < s.x.n; ++i)
            for (int j = 0; j < s.x.n; ++j) acc += G(k, i, j) * s.v[i] * s.v[j];
        d.v[k] = -acc;
    }
    return d;
}

CausalCharacter classify(const MetricField& field, const VecN& x, const VecN& v,
                         double tol) {
    MatN g = eval_metric_raw(field, x);
    const double q = quad_form(g, v, v);
    if (std::abs(q) <= tol) return CausalCharacter::kNull;
    return q < 0 ? CausalCharacter::kTimelike : CausalCharacter::kSpacelike;
}

CurveTrajectory integrate_once(const MetricField& field, const VecN& x0, const VecN& v0,
                               double t0, double t1, double atol, double rtol,
                               int max_steps) {
    CurveTrajectory out;
    State s{x0, v0};
    double t = t0;
    double dt = (t1 - t0) / 64.0;
    const double dt_min = (t1 - t0) * 1e-13;

    MatN g0 = eval_metric_raw(field, x0);
    const double q0 = quad_form(g0, v0, v0);
    const double vscale = std::max(1.0, std::sqrt(std::abs(dot(v0, v0))));

    out.params.push_back(t);
    out.points.push_back(s.x);
    out.velocities.push_back(s.v);

    State k[7];
    int steps = 0;
    while (t < t1 && steps++ < max_steps) {
        if (t + dt > t1) dt = t1 - t;
        bool stage_ok = true;
        k[0] = geodesic_rhs(field, s);
        State y5{};
        for (int st = 1; st < 7 && stage_ok; ++st) {
            State ys = s;
            for (int j = 0; j < st; ++j)
                if (kA[st][j] != 0.0) ys = axpy(ys, dt * kA[st][j], k[j]);
            if (!field.domain.contains(ys.x)) {
                stage_ok = false;
                break;
            }
            if (st < 6)
                k[st] = geodesic_rhs(field, ys);
            else {
                y5 = ys;  // stage 7 point equals the 5th-order solution
                k[6] = geodesic_rhs(field, ys);
            }
        }
        if (!stage_ok) {
            dt *= 0.5;
            if (dt < dt_min) {
                out.exited_domain = true;
                break;
            }
            continue;
        }
        // error estimate from the embedded 4th-order solution
        double err = 0;
        for (int i = 0; i < s.x.n; ++i) {
            double e_x = 0, e_v = 0;
            for (int st = 0; st < 7; ++st) {
                e_x += (kB5[st] - kB4[st]) * k[st].x[i];
                e_v += (kB5[st] - kB4[st]) * k[st].v[i];
            }
            const double sc_x = atol + rtol * std::max(std::abs(s.x[i]), std::abs(y5.x[i]));
            const double sc_v = atol + rtol * vscale;
            err = std::max(err, std::abs(dt * e_x) / sc_x);
            err = std::max(err, std::abs(dt * e_v) / sc_v);
        }
        if (err <= 1.0) {
            t += dt;
            s = y5;
            out.params.push_back(t);
            out.points.push_back(s.x);
            out.velocities.push_back(s.v);
            MatN g = eval_metric_raw(field, s.x);
            out.affine_drift =
                std::max(out.affine_drift, std::abs(quad_form(g, s.v, s.v) - q0));
        }
        const double fac =
            std::clamp(0.9 * std::pow(std::max(err, 1e-12), -0.2), 0.2, 5.0);
        dt *= fac;
        if (dt < dt_min) {
            if (err > 1.0) throw StiffnessError("integrate_geodesic: step underflow");
            break;
        }
    }
    return out;
}

}  // namespace

VecN CurveTrajectory::point_at(double t) const {
    const auto it = std::upper_bound(params.begin(), params.end(), t);
    size_t j = static_cast<size_t>(std::max<ptrdiff_t>(1, it - params.begin()));
    j = std::min(j, params.size() - 1);
    const size_t i = j - 1;
    const double h = params[j] - params[i];
    if (h <= 0) return points[i];
    const double u = std::clamp((t - params[i]) / h, 0.0, 1.0);
    const double u2 = u * u, u3 = u2 * u;
    VecN r(points[i].n);
    for (int c = 0; c < r.n; ++c)
        r[c] = (2 * u3 - 3 * u2 + 1) * points[i][c] + (u3 - 2 * u2 + u) * h * velocities[i][c] +
               (-2 * u3 + 3 * u2) * points[j][c] + (u3 - u2) * h * velocities[j][c];
    return r;
}

VecN CurveTrajectory::velocity_at(double t) const {
    const auto it = std::upper_bound(params.begin(), params.end(), t);
    size_t j = static_cast<size_t>(std::max<ptrdiff_t>(1, it - params.begin()));
    j = std::min(j, params.size() - 1);
    const size_t i = j - 1;
    const double h = params[j] - params[i];
    if (h <= 0) return velocities[i];
    const double u = std::clamp((t - params[i]) / h, 0.0, 1.0);
    const double u2 = u * u;
    VecN r(points[i].n);
    for (int c = 0; c < r.n; ++c)
        r[c] = ((6 * u2 - 6 * u) * points[i][c] + (3 * u2 - 4 * u + 1) * h * velocities[i][c] +
                (-6 * u2 + 6 * u) * points[j][c] + (3 * u2 - 2 * u) * h * velocities[j][c]) /
               h;
    return r;
}

CurveTrajectory integrate_geodesic(const MetricField& field, const VecN& x0, const VecN& v0,
                                   double t0, double t1, const IntegratorOptions& opts) {
    if (norm2(v0) == 0.0) throw InvalidInput("integrate_geodesic: zero initial velocity");
    if (!field.domain.contains(x0))
        throw DomainError("integrate_geodesic: initial point outside chart");
    double atol = opts.abs_tol, rtol = opts.rel_tol;
    CurveTrajectory out;
    for (int attempt = 0; attempt <= opts.drift_retries; ++attempt) {
        out = integrate_once(field, x0, v0, t0, t1, atol, rtol, opts.max_steps);
        if (out.size() < 2)
            throw DomainError("integrate_geodesic: immediate domain exit");
        if (out.affine_drift <= opts.affine_drift_tol) break;
        atol *= 0.1;
        rtol *= 0.1;
    }
    const double vnorm = dot(v0, v0);
    const double char_tol = 1e-7 * std::max(1.0, std::abs(vnorm));
    out.segment_character.resize(static_cast<size_t>(out.size() - 1));
    for (int i = 0; i + 1 < out.size(); ++i)
        out.segment_character[static_cast<size_t>(i)] =
            classify(field, out.points[static_cast<size_t>(i)],
                     out.velocities[static_cast<size_t>(i)], char_tol);
    bool causal = true;
    for (auto c : out.segment_character)
        if (c == CausalCharacter::kSpacelike) causal = false;
    if (causal) {
        try {
            out.length = lorentzian_length(field, out, char_tol);
        } catch (const InvalidInput&) {
            // interpolation noise near a violent endpoint (singular core):
            // fall back to the trapezoid over the stored samples
            double len = 0;
            for (size_t k = 0; k + 1 < out.params.size(); ++k) {
                auto rad = [&](size_t i) {
                    MatN g = eval_metric_raw(field, out.points[i]);
                    return std::sqrt(std::max(
                        0.0, -quad_form(g, out.velocities[i], out.velocities[i])));
                };
                len += 0.5 * (rad(k) + rad(k + 1)) * (out.params[k + 1] - out.params[k]);
            }
            out.length = len;
        }
    }
    return out;
}

std::vector<VecN> parallel_transport(const MetricField& field, const CurveTrajectory& curve,
                                     const VecN& w0) {
    std::vector<VecN> out;
    out.reserve(curve.points.size());
    VecN w = w0;
    out.push_back(w);
    auto rhs = [&](double t, const VecN& wv) {
        VecN x = curve.point_at(t);
        VecN v = curve.velocity_at(t);
        ChristoffelAt G = christoffel(field, x);
        VecN d(wv.n);
        for (int kk = 0; kk < wv.n; ++kk) {
            double acc = 0;
            for (int i = 0; i < wv.n; ++i)
                for (int j = 0; j < wv.n; ++j) acc += G(kk, i, j) * v[i] * wv[j];
            d[kk] = -acc;
        }
        return d;
    };
    for (size_t seg = 0; seg + 1 < curve.params.size(); ++seg) {
        const double ta = curve.params[seg], tb = curve.params[seg + 1];
        const int sub = 2;
        double t = ta;
        const double h = (tb - ta) / sub;
        for (int s = 0; s < sub; ++s) {
            VecN k1 = rhs(t, w);
            VecN k2 = rhs(t + h / 2, w + (h / 2) * k1);
            VecN k3 = rhs(t + h / 2, w + (h / 2) * k2);
            VecN k4 = rhs(t + h, w + h * k3);
            w += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
        }
        out.push_back(w);
    }
    return out;
}

double lorentzian_length(const MetricField& field, const CurveTrajectory& curve,
                         double tol) {
    (void)tol;
    for (auto c : curve.segment_character)
        if (c == CausalCharacter::kSpacelike)
            throw InvalidInput("lorentzian_length: spacelike segment");
    const auto& xs = gl_nodes(4);
    const auto& ws = gl_weights(4);
    double total = 0;
    for (size_t seg = 0; seg + 1 < curve.params.size(); ++seg) {
        const double ta = curve.params[seg], tb = curve.params[seg + 1];
        const double half = 0.5 * (tb - ta), mid = 0.5 * (ta + tb);
        for (size_t i = 0; i < xs.size(); ++i) {
            const double t = mid + half * xs[i];
            VecN x = curve.point_at(t);
            VecN v = curve.velocity_at(t);
            MatN g = eval_metric_raw(field, x);
            double q = quad_form(g, v, v);
            // interpolated null velocities carry small noise of either sign;
            // grossly spacelike points still fail
            const double scale = std::max(1.0, dot(v, v));
            if (q > 1e-3 * scale)
                throw InvalidInput("lorentzian_length: spacelike point on segment");
            // radicand clamp band around null
            if (q > -std::max(tol, 1e-5) * scale) q = 0.0;
            total += half * ws[i] * std::sqrt(-q);
        }
    }
    return total;
}

double polygon_length(const MetricField& field, const std::vector<VecN>& vertices,
                      double causal_tol) {
    const auto& xs = gl_nodes(4);
    const auto& ws = gl_weights(4);
    double total = 0;
    for (size_t k = 0; k + 1 < vertices.size(); ++k) {
        VecN d = vertices[k + 1] - vertices[k];
        for (size_t i = 0; i < xs.size(); ++i) {
            const double u = 0.5 * (1.0 + xs[i]);
            VecN x = vertices[k] + u * d;
            MatN g = eval_metric_raw(field, x);
            double q = quad_form(g, d, d);
            if (q > causal_tol * std::max(1.0, dot(d, d)))
                throw InvalidInput("polygon_length: spacelike segment");
            q = std::min(q, 0.0);
            total += 0.5 * ws[i] * std::sqrt(-q);
        }
    }
    return total;
}

// ---------------------------------------------------------------------------

VariationReport break_variation(const MetricField& field, const BrokenGeodesic& broken,
                                const std::vector<double>& s_list) {
    const int n = field.dim;
    const VecN& bp = broken.left.points.back();
    {
        VecN d = bp - broken.right.points.front();
        if (norm2(d) > 1e-7)
            throw InvalidInput("break_variation: segments do not share the break point");
    }
    MatN g = eval_metric_raw(field, bp);
    VecN v = broken.v;
    VecN w = broken.w;
    const double vv = quad_form(g, v, v);
    const double vw = quad_form(g, v, w);
    const double ww = quad_form(g, w, w);
    if (vw >= 0)
        throw InvalidInput("break_variation: v, w not both future (or past) causal");
    // proportionality check
    {
        double scale = 0;
        for (int i = 0; i < n; ++i)
            if (std::abs(v[i]) > 1e-12) {
                scale = w[i] / v[i];
                break;
            }
        VecN diff = w - scale * v;
        if (norm2(diff) <= 1e-9 * norm2(w))
            throw InvalidInput("break_variation: unbroken geodesic (v, w proportional)");
    }

    // Rescale w -> alpha w so that <v,v> - <v,w> > 0 and <v,w> - <w,w> < 0.
    double alpha = 1.0;
    if (!(vv - vw > 0.0 && vw - ww < 0.0)) {
        const double lower = vv / vw;             // >= 0 since vv <= 0, vw < 0
        const double upper = (ww < 0) ? vw / ww : std::numeric_limits<double>::infinity();
        if (std::isfinite(upper)) {
            if (!(upper > lower))
                throw InvalidInput("break_variation: normalization unattainable");
            alpha = (lower > 0) ? std::sqrt(lower * upper) : 0.5 * upper;
        } else {
            alpha = std::max(1.0, 2.0 * lower);
        }
    }
    VecN wa = alpha * w;

    // Lengthening direction: y = w - v gives g(c', X') < 0 on both sides.
    VecN y = wa - v;

    // Transport y along both segments (stored forward; reuse samples).
    std::vector<VecN> y_right = parallel_transport(field, broken.right, y);
    // left segment: transport backward by reversing the stored curve
    CurveTrajectory rev;
    const size_t m = broken.left.points.size();
    rev.params.reserve(m);
    rev.points.reserve(m);
    rev.velocities.reserve(m);
    const double tl0 = broken.left.params.front(), tl1 = broken.left.params.back();
    for (size_t i = 0; i < m; ++i) {
        const size_t j = m - 1 - i;
        rev.params.push_back(tl0 + (tl1 - broken.left.params[j]));
        rev.points.push_back(broken.left.points[j]);
        VecN nv = broken.left.velocities[j];
        nv *= -1.0;
        rev.velocities.push_back(nv);
    }
    std::vector<VecN> y_left_rev = parallel_transport(field, rev, y);
    std::vector<VecN> y_left(m);
    for (size_t i = 0; i < m; ++i) y_left[i] = y_left_rev[m - 1 - i];

    // Hat profile: 0 at the outer endpoints, 1 at the break.
    const double len_l = tl1 - tl0;
    const double tr0 = broken.right.params.front(), tr1 = broken.right.params.back();
    const double len_r = tr1 - tr0;

    VariationReport rep;
    rep.reparam_alpha = alpha;

    auto flowed_length = [&](double s, bool& timelike) {
        double total = 0;
        timelike = true;
        // left side
        auto side = [&](const CurveTrajectory& seg, const std::vector<VecN>& Y, bool left) {
            CurveTrajectory c;
            const size_t cnt = seg.points.size();
            c.params = seg.params;
            c.points.resize(cnt);
            c.velocities.resize(cnt);
            for (size_t i = 0; i < cnt; ++i) {
                const double t = seg.params[i];
                const double f = left ? (t - tl0) / len_l : (tr1 - t) / len_r;
                const double fp = left ? 1.0 / len_l : -1.0 / len_r;
                c.points[i] = seg.points[i] + (s * f) * Y[i];
                // X' = f' Y + f Y', with Y' = -Gamma(c', Y)
                ChristoffelAt G = christoffel(field, seg.points[i]);
                VecN yprime(n);
                for (int kk = 0; kk < n; ++kk) {
                    double acc = 0;
                    for (int a = 0; a < n; ++a)
                        for (int b = 0; b < n; ++b)
                            acc += G(kk, a, b) * seg.velocities[i][a] * Y[i][b];
                    yprime[kk] = -acc;
                }
                c.velocities[i] = seg.velocities[i] + s * (fp * Y[i] + f * yprime);
            }
            c.segment_character.assign(cnt - 1, CausalCharacter::kTimelike);
            // verify causal character of the flowed side
            for (size_t i = 0; i < cnt; ++i) {
                MatN gg = eval_metric_raw(field, c.points[i]);
                if (quad_form(gg, c.velocities[i], c.velocities[i]) >= 0) timelike = false;
            }
            total += lorentzian_length(field, c, 1e-6);
        };
        side(broken.left, y_left, true);
        // right side uses rescaled parametrization for alpha != 1: the stored
        // velocities scale by alpha and the parameter range by 1/alpha; the
        // length integral is reparametrization invariant, so flow the stored
        // curve with velocities alpha * v.
        CurveTrajectory right = broken.right;
        for (auto& vel : right.velocities) vel *= alpha;
        for (auto& tp : right.params) tp = tr0 + (tp - tr0) / alpha;
        // recompute f parameters on the rescaled range
        const double rlen = (tr1 - tr0) / alpha;
        {
            CurveTrajectory c;
            const size_t cnt = right.points.size();
            c.params = right.params;
            c.points.resize(cnt);
            c.velocities.resize(cnt);
            for (size_t i = 0; i < cnt; ++i) {
                const double t = right.params[i];
                const double f = (tr0 + rlen - t) / rlen;
                const double fp = -1.0 / rlen;
                c.points[i] = right.points[i] + (s * f) * y_right[i];
                ChristoffelAt G = christoffel(field, right.points[i]);
                VecN yprime(n);
                for (int kk = 0; kk < n; ++kk) {
                    double acc = 0;
                    for (int a = 0; a < n; ++a)
                        for (int b = 0; b < n; ++b)
                            acc += G(kk, a, b) * right.velocities[i][a] * y_right[i][b];
                    yprime[kk] = -acc;
                }
                c.velocities[i] = right.velocities[i] + s * (fp * y_right[i] + f * yprime);
            }
            c.segment_character.assign(cnt - 1, CausalCharacter::kTimelike);
            for (size_t i = 0; i < cnt; ++i) {
                MatN gg = eval_metric_raw(field, c.points[i]);
                if (quad_form(gg, c.velocities[i], c.velocities[i]) >= 0) timelike = false;
            }
            total += lorentzian_length(field, c, 1e-6);
        }
        return total;
    };

    bool tl = false;
    rep.base_length = flowed_length(0.0, tl);
    rep.rows.push_back({0.0, rep.base_length, tl});
    double smallest = std::numeric_limits<double>::infinity();
    double smallest_len = 0;
    for (double s : s_list) {
        if (s <= 0) continue;
        bool tlk = false;
        const double L = flowed_length(s, tlk);
        rep.rows.push_back({s, L, tlk});
        if (s < smallest) {
            smallest = s;
            smallest_len = L;
        }
    }
    if (std::isfinite(smallest)) {
        rep.lengthened = smallest_len > rep.base_length;
        rep.dL_ds_estimate = (smallest_len - rep.base_length) / smallest;
    }
    return rep;
}

// ---------------------------------------------------------------------------

namespace {

struct PenaltyObjective {
    const MetricField& field;
    const BackgroundMetric& h;
    double weight;

    // length minus weighted causality violation over the polygon
    double eval(const std::vector<VecN>& verts) const {
        const auto& xs = gl_nodes(3);
        const auto& ws = gl_weights(3);
        double len = 0, viol = 0;
        for (size_t k = 0; k + 1 < verts.size(); ++k) {
            VecN d = verts[k + 1] - verts[k];
            const double dh2 = std::max(quad_form(h.h, d, d), 1e-30);
            for (size_t i = 0; i < xs.size(); ++i) {
                const double u = 0.5 * (1.0 + xs[i]);
                VecN x = verts[k] + u * d;
                if (!field.domain.contains(x)) return -1e30;
                MatN g = eval_metric_raw(field, x);
                const double q = quad_form(g, d, d);
                if (q < 0)
                    len += 0.5 * ws[i] * std::sqrt(-q);
                else
                    viol += 0.5 * ws[i] * q / dh2;
                // future direction
                VecN fut = field.future_at(x);
                const double fq = quad_form(g, d, fut);
                if (fq >= 0) viol += 0.5 * ws[i] * (1.0 + fq / dh2);
            }
        }
        return len - weight * viol;
    }
};

}  // namespace

double polygon_geodesic_residual(const MetricField& field, const std::vector<VecN>& vertices,
                                 double dt, const BackgroundMetric& h) {
    double worst = 0;
    const int n = field.dim;
    for (size_t k = 1; k + 1 < vertices.size(); ++k) {
        VecN acc = vertices[k + 1] - 2.0 * vertices[k] + vertices[k - 1];
        acc *= 1.0 / (dt * dt);
        VecN v = vertices[k + 1] - vertices[k];
        v *= 1.0 / dt;
        ChristoffelAt G = christoffel(field, vertices[k]);
        VecN defect(n);
        for (int kk = 0; kk < n; ++kk) {
            double s = 0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) s += G(kk, i, j) * v[i] * v[j];
            defect[kk] = acc[kk] + s;
        }
        worst = std::max(worst, h.norm(defect));
    }
    return worst;
}

MaximizerResult maximizer_search(const MetricField& field, const VecN& p, const VecN& q,
                                 int n_segments, const BackgroundMetric& h,
                                 const MaximizerOptions& opts) {
    MaximizerResult res;
    const int n = field.dim;
    if (n_segments < 2) throw InvalidInput("maximizer_search: need at least 2 segments");

    // straight-chord initialization
    std::vector<VecN> verts(static_cast<size_t>(n_segments) + 1);
    for (int k = 0; k <= n_segments; ++k) {
        const double u = static_cast<double>(k) / n_segments;
        verts[static_cast<size_t>(k)] = p + u * (q - p);
    }
    {
        VecN d = q - p;
        MatN g = eval_metric_raw(field, p + 0.5 * d);
        VecN fut = field.future_at(p);
        if (quad_form(g, d, d) >= 0 || quad_form(g, d, fut) >= 0) {
            res.feasible = false;  // no causal chord; search not attempted
            return res;
        }
    }

    const double scale = h.dist(p, q) / n_segments;
    PenaltyObjective obj{field, h, opts.penalty_start};
    double step = 0.5 * scale;
    for (int outer = 0; outer < opts.outer_iterations; ++outer) {
        for (int sweep = 0; sweep < opts.sweeps_per_outer; ++sweep) {
            for (size_t k = 1; k + 1 < verts.size(); ++k) {
                for (int a = 0; a < n; ++a) {
                    // parabolic/golden step on one coordinate
                    const double x0 = verts[k][a];
                    double best_x = x0, best_f = obj.eval(verts);
                    for (double sgn : {1.0, -1.0}) {
                        double st = step;
                        for (int tries = 0; tries < 8; ++tries) {
                            verts[k][a] = x0 + sgn * st;
                            const double f = obj.eval(verts);
                            if (f > best_f) {
                                best_f = f;
                                best_x = verts[k][a];
                                st *= 1.6;
                            } else {
                                st *= 0.5;
                                if (st < 1e-4 * step) break;
                            }
                        }
                    }
                    verts[k][a] = best_x;
                }
            }
        }
        obj.weight *= 2.0;
        step *= 0.6;
    }

    // Refinement: Newton on the stationarity of the discrete energy
    //   E = sum_k g(mid_k)(d_k, d_k)  (uniform parameter).
    // The gradient couples nearest neighbors only, so each Newton step is a
    // block-tridiagonal solve.
    auto segment_energy = [&](const VecN& a, const VecN& b) {
        VecN d = b - a;
        VecN mid = a + 0.5 * d;
        MatN g = eval_metric_raw(field, mid);
        return quad_form(g, d, d);
    };
    const double fd = 1e-5 * std::max(1.0, scale);
    // gradient of E with respect to vertex k (touches segments k-1 and k)
    auto grad_at = [&](std::vector<VecN>& vs, size_t k) {
        VecN g(n);
        const VecN saved = vs[k];
        for (int a = 0; a < n; ++a) {
            vs[k][a] = saved[a] + fd;
            const double ep =
                segment_energy(vs[k - 1], vs[k]) + segment_energy(vs[k], vs[k + 1]);
            vs[k][a] = saved[a] - fd;
            const double em =
                segment_energy(vs[k - 1], vs[k]) + segment_energy(vs[k], vs[k + 1]);
            vs[k][a] = saved[a];
            g[a] = (ep - em) / (2 * fd);
        }
        return g;
    };
    const size_t m = verts.size() - 2;  // interior vertex count
    if (m >= 1) {
        std::vector<MatN> A(m, MatN(n)), B(m, MatN(n)), C(m, MatN(n));
        std::vector<VecN> R(m, VecN(n));
        for (int iter = 0; iter < 12; ++iter) {
            for (size_t k = 1; k + 1 < verts.size(); ++k) {
                const size_t row = k - 1;
                R[row] = grad_at(verts, k);
                for (int off = -1; off <= 1; ++off) {
                    const size_t kk = k + static_cast<size_t>(off);
                    if (kk == 0 || kk + 1 == verts.size()) continue;  // fixed endpoints
                    MatN& block = (off < 0 ? A[row] : (off == 0 ? B[row] : C[row]));
                    const VecN saved = verts[kk];
                    for (int a = 0; a < n; ++a) {
                        verts[kk][a] = saved[a] + fd;
                        VecN rp = grad_at(verts, k);
                        verts[kk][a] = saved[a] - fd;
                        VecN rm = grad_at(verts, k);
                        verts[kk][a] = saved[a];
                        for (int i = 0; i < n; ++i)
                            block(i, a) = (rp[i] - rm[i]) / (2 * fd);
                    }
                }
            }
            // block Thomas sweep
            std::vector<MatN> Bw = B;
            std::vector<VecN> Rw = R;
            bool solve_ok = true;
            try {
                for (size_t rowk = 1; rowk < m; ++rowk) {
                    MatN inv = inverse(Bw[rowk - 1]);
                    // L = A[row] * inv
                    MatN L(n);
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < n; ++j) {
                            double s = 0;
                            for (int q2 = 0; q2 < n; ++q2)
                                s += A[rowk](i, q2) * inv(q2, j);
                            L(i, j) = s;
                        }
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < n; ++j) {
                            double s = 0;
                            for (int q2 = 0; q2 < n; ++q2)
                                s += L(i, q2) * C[rowk - 1](q2, j);
                            Bw[rowk](i, j) -= s;
                        }
                    VecN lr = matvec(L, Rw[rowk - 1]);
                    Rw[rowk] -= lr;
                }
                std::vector<VecN> delta(m, VecN(n));
                delta[m - 1] = solve(Bw[m - 1], Rw[m - 1]);
                for (size_t rowk = m - 1; rowk-- > 0;) {
                    VecN rhs = Rw[rowk] - matvec(C[rowk], delta[rowk + 1]);
                    delta[rowk] = solve(Bw[rowk], rhs);
                }
                double max_move = 0;
                for (size_t k = 1; k + 1 < verts.size(); ++k) {
                    VecN step = delta[k - 1];
                    double damp = 1.0;
                    if (h.norm(step) > 0.2 * scale) damp = 0.2 * scale / h.norm(step);
                    VecN moved = verts[k] - damp * step;
                    if (field.domain.contains(moved)) {
                        verts[k] = moved;
                        max_move = std::max(max_move, damp * h.norm(step));
                    }
                }
                if (max_move < opts.refine_tol) break;
            } catch (const InvalidMetric&) {
                solve_ok = false;
            }
            if (!solve_ok) break;
        }
    }

    res.feasible = true;
    res.vertices = verts;
    try {
        res.length = polygon_length(field, verts, 1e-7);
    } catch (const InvalidInput&) {
        res.feasible = false;
        return res;
    }
    res.residual = polygon_geodesic_residual(field, verts, 1.0 / n_segments, h);

    CurveTrajectory path;
    path.params.resize(verts.size());
    path.points = verts;
    path.velocities.resize(verts.size());
    for (size_t k = 0; k < verts.size(); ++k) {
        path.params[k] = static_cast<double>(k) / n_segments;
        // central differences in the interior
        if (k == 0)
            path.velocities[k] = (verts[1] - verts[0]) * static_cast<double>(n_segments);
        else if (k + 1 == verts.size())
            path.velocities[k] =
                (verts[k] - verts[k - 1]) * static_cast<double>(n_segments);
        else
            path.velocities[k] =
                (verts[k + 1] - verts[k - 1]) * (0.5 * static_cast<double>(n_segments));
    }
    path.segment_character.assign(verts.size() - 1, CausalCharacter::kTimelike);
    path.length = res.length;
    res.path = std::move(path);
    return res;
}

ShootResult shoot_connect(const MetricField& field, const VecN& p, const VecN& q, double tol,
                          const BackgroundMetric& h, int max_starts) {
    ShootResult res;
    if (h.dist(p, q) < 1e-12)
        throw InvalidInput("shoot_connect: coincident endpoints");
    const int n = field.dim;
    IntegratorOptions iopts;
    iopts.abs_tol = iopts.rel_tol = 1e-10;

    auto endpoint = [&](const VecN& v, CurveTrajectory* traj = nullptr) -> std::optional<VecN> {
        try {
            CurveTrajectory c = integrate_geodesic(field, p, v, 0.0, 1.0, iopts);
            if (c.exited_domain || std::abs(c.t_end() - 1.0) > 1e-9) return std::nullopt;
            if (traj) *traj = std::move(c);
            return traj ? traj->points.back() : c.points.back();
        } catch (const std::runtime_error&) {
            return std::nullopt;
        }
    };

    VecN chord = q - p;
    std::vector<VecN> starts = {chord};
    for (int s = 1; s < max_starts; ++s) {
        VecN v = chord;
        for (int a = 0; a < n; ++a)
            v[a] *= 1.0 + 0.08 * ((s + a) % 3 - 1);
        starts.push_back(v);
    }

    for (const VecN& v0 : starts) {
        VecN v = v0;
        for (int iter = 0; iter < 30; ++iter) {
            auto e = endpoint(v);
            if (!e) break;
            VecN r = *e - q;
            const double miss = h.norm(r);
            if (miss < tol) {
                CurveTrajectory traj;
                endpoint(v, &traj);
                res.found = true;
                res.path = std::move(traj);
                res.initial_velocity = v;
                res.miss = miss;
                return res;
            }
            // Gauss-Newton with finite-difference Jacobian
            MatN J(n);
            const double dv = 1e-6 * std::max(1.0, norm2(v));
            bool jac_ok = true;
            for (int a = 0; a < n; ++a) {
                VecN vp = v;
                vp[a] += dv;
                auto ep = endpoint(vp);
                if (!ep) {
                    jac_ok = false;
                    break;
                }
                for (int i = 0; i < n; ++i) J(i, a) = ((*ep)[i] - (*e)[i]) / dv;
            }
            if (!jac_ok) break;
            VecN step;
            try {
                step = solve(J, r);
            } catch (const InvalidMetric&) {
                break;
            }
            double damp = 1.0;
            if (norm2(step) > 0.5 * norm2(v)) damp = 0.5 * norm2(v) / norm2(step);
            v -= damp * step;
        }
    }
    return res;
}

FunnelReport branching_probe(const MetricField& field, const VecN& x0, const VecN& v0,
                             const std::vector<double>& perturbation_scales,
                             const BackgroundMetric& h) {
    FunnelReport rep;
    const int n = field.dim;
    IntegratorOptions base_opts;
    for (double sigma : perturbation_scales) {
        std::vector<VecN> endpoints;
        // perturbations of the initial velocity along each axis, both signs,
        // plus the unperturbed ray under two integrator settings
        std::vector<std::pair<VecN, double>> runs;
        runs.push_back({v0, 1.0});
        runs.push_back({v0, 0.1});
        const double vmag = norm2(v0);
        for (int a = 0; a < n; ++a)
            for (double sgn : {1.0, -1.0}) {
                VecN v = v0;
                v[a] += sgn * sigma * vmag;
                runs.push_back({v, 1.0});
            }
        for (const auto& [v, tolf] : runs) {
            IntegratorOptions o = base_opts;
            o.abs_tol *= tolf;
            o.rel_tol *= tolf;
            try {
                CurveTrajectory c = integrate_geodesic(field, x0, v, 0.0, 1.0, o);
                if (!c.exited_domain) endpoints.push_back(c.points.back());
            } catch (const std::runtime_error&) {
            }
        }
        double div = 0;
        for (size_t i = 0; i < endpoints.size(); ++i)
            for (size_t j = i + 1; j < endpoints.size(); ++j)
                div = std::max(div, h.dist(endpoints[i], endpoints[j]));
        rep.rows.push_back({sigma, div, div / sigma});
    }
    // heuristic flag: ratio grows by >= 10x from the largest to the smallest scale
    double rmax = 0, rmin = std::numeric_limits<double>::infinity();
    for (const auto& r : rep.rows) {
        rmax = std::max(rmax, r.ratio);
        rmin = std::min(rmin, r.ratio);
    }
    if (!rep.rows.empty() && rep.rows.back().ratio > 10.0 * rep.rows.front().ratio &&
        rep.rows.back().sigma < rep.rows.front().sigma) {
        rep.flagged = true;
        rep.note = "divergence/sigma grows as sigma shrinks: possible non-uniqueness funnel";
    } else {
        rep.flagged = false;
        rep.note = "no branching detected at this resolution";
    }
    return rep;
}

double hausdorff_distance(const std::vector<VecN>& a, const std::vector<VecN>& b,
                          const BackgroundMetric& h) {
    auto point_to_polyline = [&](const VecN& p, const std::vector<VecN>& poly) {
        double best = std::numeric_limits<double>::infinity();
        for (size_t k = 0; k + 1 < poly.size(); ++k) {
            VecN d = poly[k + 1] - poly[k];
            VecN w = p - poly[k];
            const double dd = quad_form(h.h, d, d);
            double t = dd > 0 ? std::clamp(quad_form(h.h, w, d) / dd, 0.0, 1.0) : 0.0;
            VecN c = poly[k] + t * d;
            best = std::min(best, h.dist(p, c));
        }
        if (poly.size() == 1) best = h.dist(p, poly[0]);
        return best;
    };
    double worst = 0;
    for (const VecN& p : a) worst = std::max(worst, point_to_polyline(p, b));
    for (const VecN& p : b) worst = std::max(worst, point_to_polyline(p, a));
    return worst;
}

void write_trajectory_csv(const std::string& path, const CurveTrajectory& curve,
                          const std::string& scenario_id, const std::string& version) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw ConfigError("cannot open " + path);
    std::fprintf(f, "scenario,version,param");
    const int n = curve.points.empty() ? 0 : curve.points[0].n;
    for (int i = 0; i < n; ++i) std::fprintf(f, ",x%d", i);
    for (int i = 0; i < n; ++i) std::fprintf(f, ",v%d", i);
    std::fprintf(f, "\n");
    for (size_t k = 0; k < curve.params.size(); ++k) {
        std::fprintf(f, "%s,%s,%.12g", scenario_id.c_str(), version.c_str(), curve.params[k]);
        for (int i = 0; i < n; ++i) std::fprintf(f, ",%.12g", curve.points[k][i]);
        for (int i = 0; i < n; ++i) std::fprintf(f, ",%.12g", curve.velocities[k][i]);
        std::fprintf(f, "\n");
    }
    std::fclose(f);
}

void write_funnel_csv(const std::string& path, const FunnelReport& rep,
                      const std::string& scenario_id, const std::string& version) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw ConfigError("cannot open " + path);
    std::fprintf(f, "scenario,version,sigma,divergence,ratio,flagged\n");
    for (const auto& r : rep.rows)
        std::fprintf(f, "%s,%s,%.12g,%.12g,%.12g,%d\n", scenario_id.c_str(), version.c_str(),
                     r.sigma, r.divergence, r.ratio, rep.flagged ? 1 : 0);
    std::fclose(f);
}

}  // namespace conelab
