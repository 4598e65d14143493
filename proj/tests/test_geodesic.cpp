#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "conelab/geodesic_engine.hpp"
#include "conelab/rng.hpp"

using namespace conelab;

namespace {

const double kBrokenLength = 0.8717797887081348;  // 2 sqrt(1 - 0.81)

CurveTrajectory straight_segment(const VecN& a, const VecN& b, double t0, double t1,
                                 int samples = 9) {
    CurveTrajectory c;
    VecN v = b - a;
    v *= 1.0 / (t1 - t0);
    for (int i = 0; i < samples; ++i) {
        const double u = static_cast<double>(i) / (samples - 1);
        c.params.push_back(t0 + u * (t1 - t0));
        c.points.push_back(a + (u * (t1 - t0)) * v);
        c.velocities.push_back(v);
    }
    c.segment_character.assign(samples - 1, CausalCharacter::kTimelike);
    return c;
}

}  // namespace

TEST_CASE("minkowski geodesics are straight") {
    MetricField f = make_minkowski();
    CurveTrajectory c = integrate_geodesic(f, VecN(4), VecN{1, 1, 0, 0}, 0.0, 1.0);
    CHECK_FALSE(c.exited_domain);
    CHECK(c.affine_drift <= 1e-12);
    const VecN end = c.points.back();
    CHECK(std::abs(end[0] - 1.0) <= 1e-8);
    CHECK(std::abs(end[1] - 1.0) <= 1e-8);
    CHECK(std::abs(end[2]) <= 1e-12);
    CHECK(c.length <= 1e-8);  // null
    CHECK_THROWS_AS(integrate_geodesic(f, VecN(4), VecN(4), 0.0, 1.0), InvalidInput);
}

TEST_CASE("photon circles the r=3m sphere") {
    MetricField f = make_schwarzschild_cartesian(1.0, 9.0, 2.4);
    // tangential null launch: g_yy = 1 at (3,0,0), t-root of the null solve
    VecN x0{0.0, 3.0, 0.0, 0.0};
    MatN g = eval_metric_raw(f, x0);
    VecN u{0.0, 0.0, 1.0, 0.0};
    VecN v0 = u;
    v0[0] = null_time_component(g, u);
    // one revolution: affine length 2 pi r at unit tangential speed
    CurveTrajectory c = integrate_geodesic(f, x0, v0, 0.0, 2.0 * M_PI * 3.0);
    CHECK_FALSE(c.exited_domain);
    CHECK(c.affine_drift <= 1e-7);
    double worst = 0;
    for (const VecN& p : c.points) {
        const double r = std::sqrt(p[1] * p[1] + p[2] * p[2] + p[3] * p[3]);
        worst = std::max(worst, std::abs(r - 3.0));
    }
    CHECK(worst <= 1e-6);
    // actually made it around
    CHECK(std::atan2(c.points.back()[2], c.points.back()[1]) ==
          doctest::Approx(0.0).epsilon(0.2));
}

TEST_CASE("null geodesic through the low-regularity locus") {
    MetricField f = make_c1_model();
    VecN x0{0.0, -0.5, 0.0, 0.0};
    MatN g = eval_metric_raw(f, x0);
    VecN u{0.0, 1.0, 0.0, 0.0};
    VecN v0 = u;
    v0[0] = null_time_component(g, u);
    CurveTrajectory c = integrate_geodesic(f, x0, v0, 0.0, 1.0);
    CHECK(c.affine_drift <= 1e-7);
    CHECK(c.points.back()[1] > 0.2);  // crossed the kink

    // cross-check with a tighter tolerance
    IntegratorOptions tight;
    tight.abs_tol = tight.rel_tol = 1e-11;
    CurveTrajectory c2 = integrate_geodesic(f, x0, v0, 0.0, 1.0, tight);
    BackgroundMetric h = BackgroundMetric::euclidean(4);
    CHECK(h.dist(c.points.back(), c2.points.back()) <= 1e-7);
}

TEST_CASE("stops at the chart boundary with the exit flag") {
    MetricField f = make_minkowski(4, 1.0);
    CurveTrajectory c = integrate_geodesic(f, VecN(4), VecN{1, 0, 0, 0}, 0.0, 5.0);
    CHECK(c.exited_domain);
    CHECK(c.points.back()[0] <= 1.0);
    CHECK(c.points.back()[0] > 0.9);
}

TEST_CASE("parallel transport: constant in flat space, conserved products") {
    MetricField f = make_minkowski();
    CurveTrajectory c = integrate_geodesic(f, VecN(4), VecN{1, 0.3, 0, 0}, 0.0, 2.0);
    std::vector<VecN> w = parallel_transport(f, c, VecN{0.1, 0.2, 0.3, 0.4});
    for (const VecN& wi : w)
        for (int a = 0; a < 4; ++a)
            CHECK(wi[a] == doctest::Approx(w.front()[a]).epsilon(1e-12));

    MetricField s = make_schwarzschild_cartesian(1.0, 9.0, 2.4);
    VecN x0{0.0, 4.0, 0.0, 0.0};
    MatN g = eval_metric_raw(s, x0);
    VecN u{0.0, 0.2, 1.0, 0.0};
    VecN v0 = u;
    v0[0] = null_time_component(g, u);
    CurveTrajectory cs = integrate_geodesic(s, x0, v0, 0.0, 3.0);
    VecN w0{0.0, 0.0, 0.0, 1.0};
    std::vector<VecN> ws = parallel_transport(s, cs, w0);
    const double gww0 = quad_form(g, w0, w0);
    const double gwv0 = quad_form(g, w0, v0);
    for (size_t i = 0; i < ws.size(); ++i) {
        MatN gi = eval_metric_raw(s, cs.points[i]);
        CHECK(std::abs(quad_form(gi, ws[i], ws[i]) - gww0) <= 1e-8);
        CHECK(std::abs(quad_form(gi, ws[i], cs.velocities[i]) - gwv0) <= 1e-8);
    }
}

TEST_CASE("holonomy around a latitude circle matches the curvature integral") {
    MetricField f = make_sphere_block();
    const double theta0 = 1.0;
    CurveTrajectory loop;
    const int nseg = 400;
    for (int i = 0; i <= nseg; ++i) {
        loop.params.push_back(2.0 * M_PI * i / nseg);
        loop.points.push_back(VecN{0.0, theta0, 2.0 * M_PI * i / nseg, 0.0});
        loop.velocities.push_back(VecN{0.0, 0.0, 1.0, 0.0});
    }
    loop.segment_character.assign(nseg, CausalCharacter::kSpacelike);
    std::vector<VecN> w = parallel_transport(f, loop, VecN{0.0, 1.0, 0.0, 0.0});
    // rotation angle alpha = 2 pi cos(theta0) (area 2 pi (1-cos) mod 2 pi)
    const double alpha = 2.0 * M_PI * std::cos(theta0);
    CHECK(w.back()[1] == doctest::Approx(std::cos(alpha)).epsilon(1e-4));
    CHECK(std::abs(w.back()[2]) * std::sin(theta0) ==
          doctest::Approx(std::abs(std::sin(alpha))).epsilon(1e-4));
}

TEST_CASE("lengths: straight timelike, null, and the broken path") {
    MetricField f = make_minkowski();
    CurveTrajectory c = integrate_geodesic(f, VecN(4), VecN{1, 0, 0, 0}, 0.0, 2.0);
    CHECK(c.length == doctest::Approx(2.0).epsilon(1e-10));

    const double broken =
        polygon_length(f, {VecN(4), VecN{1, 0.9, 0, 0}, VecN{2, 0, 0, 0}});
    CHECK(broken == doctest::Approx(kBrokenLength).epsilon(1e-9));
    CHECK(broken < 2.0);

    CHECK_THROWS_AS(polygon_length(f, {VecN(4), VecN{0.5, 2, 0, 0}}), InvalidInput);
}

TEST_CASE("break variation lengthens the minkowski broken path") {
    MetricField f = make_minkowski();
    BrokenGeodesic broken;
    broken.left = straight_segment(VecN(4), VecN{1, 0.9, 0, 0}, 0.0, 1.0);
    broken.right = straight_segment(VecN{1, 0.9, 0, 0}, VecN{2, 0, 0, 0}, 1.0, 2.0);
    broken.v = VecN{1, 0.9, 0, 0};
    broken.w = VecN{1, -0.9, 0, 0};
    VariationReport rep = break_variation(f, broken, {0.01, 0.05, 0.1});
    CHECK(rep.base_length == doctest::Approx(kBrokenLength).epsilon(1e-9));
    CHECK(rep.lengthened);
    CHECK(rep.rows[1].length > rep.base_length);
    CHECK(rep.dL_ds_estimate > 0);
    // straight-line bound
    for (const auto& row : rep.rows) CHECK(row.length <= 2.0 + 1e-9);
}

TEST_CASE("break variation rejects an unbroken geodesic") {
    MetricField f = make_minkowski();
    BrokenGeodesic broken;
    broken.left = straight_segment(VecN(4), VecN{1, 0.5, 0, 0}, 0.0, 1.0);
    broken.right = straight_segment(VecN{1, 0.5, 0, 0}, VecN{2, 1, 0, 0}, 1.0, 2.0);
    broken.v = VecN{1, 0.5, 0, 0};
    broken.w = VecN{1, 0.5, 0, 0};
    CHECK_THROWS_AS(break_variation(f, broken, {0.01}), InvalidInput);
}

TEST_CASE("variation first derivative is positive on random broken configurations") {
    MetricField f = make_minkowski();
    Rng rng(42);
    int done = 0;
    while (done < 5) {
        // random future causal v, w, not proportional
        auto rand_causal = [&](double speed_cap) {
            VecN v(4);
            v[0] = 1.0;
            double s2 = 0;
            for (int a = 1; a < 4; ++a) {
                v[a] = rng.uniform(-1, 1);
                s2 += v[a] * v[a];
            }
            const double speed = rng.uniform(0.2, speed_cap);
            for (int a = 1; a < 4; ++a) v[a] *= speed / std::sqrt(s2);
            return v;
        };
        VecN v = rand_causal(0.95), w = rand_causal(0.95);
        VecN mid{1, 0, 0, 0};
        mid[1] = 0.4 * v[1];  // keep everything well inside the chart
        VecN start = mid - v;
        VecN end = mid + w;
        BrokenGeodesic broken;
        broken.left = straight_segment(start, mid, 0.0, 1.0);
        broken.right = straight_segment(mid, end, 1.0, 2.0);
        broken.v = v;
        broken.w = w;
        VariationReport rep;
        try {
            rep = break_variation(f, broken, {0.005});
        } catch (const InvalidInput&) {
            continue;  // degenerate draw
        }
        CHECK(rep.dL_ds_estimate > 0);
        ++done;
    }
}

TEST_CASE("schwarzschild broken null pair becomes timelike and longer") {
    MetricField f = make_schwarzschild_cartesian(1.0, 9.0, 2.4);
    VecN mid{1.0, 5.0, 1.0, 0.0};
    MatN g = eval_metric_raw(f, mid);
    VecN u1{0.0, 1.0, 0.4, 0.0}, u2{0.0, 1.0, -0.5, 0.2};
    VecN v = u1, w = u2;
    v[0] = null_time_component(g, u1);
    w[0] = null_time_component(g, u2);
    // integrate backward from the break along -v, forward along w
    VecN vneg = v;
    vneg *= -1.0;
    CurveTrajectory back = integrate_geodesic(f, mid, vneg, 0.0, 0.8);
    CurveTrajectory fwd = integrate_geodesic(f, mid, w, 0.0, 0.8);
    // rebuild the left segment forward oriented
    BrokenGeodesic broken;
    CurveTrajectory left;
    const size_t m = back.points.size();
    for (size_t i = 0; i < m; ++i) {
        const size_t j = m - 1 - i;
        left.params.push_back(-back.params[j]);
        left.points.push_back(back.points[j]);
        VecN vel = back.velocities[j];
        vel *= -1.0;
        left.velocities.push_back(vel);
    }
    left.segment_character.assign(m - 1, CausalCharacter::kNull);
    broken.left = left;
    broken.right = fwd;
    broken.v = left.velocities.back();
    broken.w = fwd.velocities.front();
    VariationReport rep = break_variation(f, broken, {0.02});
    CHECK(rep.base_length <= 1e-6);  // null pieces
    CHECK(rep.rows[1].length > 1e-4);
    CHECK(rep.rows[1].timelike);
}

TEST_CASE("maximizer: straight chord in flat space") {
    MetricField f = make_minkowski();
    BackgroundMetric h = BackgroundMetric::euclidean(4);
    MaximizerResult res = maximizer_search(f, VecN(4), VecN{2, 0, 0, 0}, 8, h);
    REQUIRE(res.feasible);
    CHECK(res.length == doctest::Approx(2.0).epsilon(1e-6));
    for (size_t k = 0; k < res.vertices.size(); ++k) {
        // vertices sit on the straight segment
        CHECK(std::abs(res.vertices[k][1]) <= 1e-3);
        CHECK(std::abs(res.vertices[k][2]) <= 1e-3);
        CHECK(std::abs(res.vertices[k][3]) <= 1e-3);
    }
    CHECK(res.residual <= 1e-6);
}

TEST_CASE("maximizer beats random feasible causal polygons") {
    MetricField f = make_schwarzschild_cartesian(1.0, 9.0, 2.4);
    BackgroundMetric h = BackgroundMetric::euclidean(4);
    VecN p{0.0, 6.0, 0.0, 0.0}, q{3.0, 6.5, 1.0, 0.0};
    MaximizerResult res = maximizer_search(f, p, q, 8, h);
    REQUIRE(res.feasible);
    Rng rng(5);
    int feasible_draws = 0;
    while (feasible_draws < 100) {
        std::vector<VecN> verts;
        for (int k = 0; k <= 8; ++k) {
            const double u = k / 8.0;
            VecN x = p + u * (q - p);
            if (k > 0 && k < 8)
                for (int a = 0; a < 4; ++a) x[a] += rng.uniform(-0.05, 0.05);
            verts.push_back(x);
        }
        double len;
        try {
            len = polygon_length(f, verts, 1e-9);
        } catch (const InvalidInput&) {
            continue;
        }
        ++feasible_draws;
        CHECK(len <= res.length + 1e-9);
    }
}

TEST_CASE("maximizer tracks the shooting geodesic and the residual halves") {
    MetricField f = make_schwarzschild_cartesian(1.0, 9.0, 2.4);
    BackgroundMetric h = BackgroundMetric::euclidean(4);
    const VecN pairs[3][2] = {
        {VecN{0.0, 6.0, 0.0, 0.0}, VecN{3.0, 6.5, 1.0, 0.0}},
        {VecN{0.0, 5.0, 1.0, 0.5}, VecN{2.5, 5.5, -0.5, 0.5}},
        {VecN{0.0, -4.5, 2.0, 0.0}, VecN{2.8, -5.0, 3.0, -0.5}},
    };
    for (const auto& pr : pairs) {
        ShootResult shot = shoot_connect(f, pr[0], pr[1], 1e-8, h);
        REQUIRE(shot.found);
        MaximizerResult coarse = maximizer_search(f, pr[0], pr[1], 12, h);
        REQUIRE(coarse.feasible);
        std::vector<VecN> shot_pts = shot.path.points;
        CHECK(hausdorff_distance(coarse.vertices, shot_pts, h) <= 1e-2);

        MaximizerResult fine = maximizer_search(f, pr[0], pr[1], 24, h);
        REQUIRE(fine.feasible);
        const double ratio = fine.residual / coarse.residual;
        CHECK(ratio >= 0.35);
        CHECK(ratio <= 0.65);
        CHECK(fine.length >= coarse.length - 1e-6);
    }
}

TEST_CASE("maximizer on the c1 model straddles the kink with a small defect") {
    MetricField f = make_c1_model(2.5);
    BackgroundMetric h = BackgroundMetric::euclidean(4);
    MaximizerOptions mopts;
    mopts.outer_iterations = 3;
    mopts.sweeps_per_outer = 2;
    MaximizerResult res = maximizer_search(f, VecN{0.0, -0.5, 0.0, 0.0},
                                           VecN{2.0, 0.5, 0.0, 0.0}, 160, h, mopts);
    REQUIRE(res.feasible);
    CHECK(res.residual <= 1e-3);
    // the maximizer crosses the locus
    bool crossed = false;
    for (size_t k = 0; k + 1 < res.vertices.size(); ++k)
        if (res.vertices[k][1] <= 0 && res.vertices[k + 1][1] >= 0) crossed = true;
    CHECK(crossed);
}

TEST_CASE("infeasible endpoints return no path") {
    MetricField f = make_minkowski();
    BackgroundMetric h = BackgroundMetric::euclidean(4);
    MaximizerResult res = maximizer_search(f, VecN(4), VecN{0.2, 2.0, 0, 0}, 8, h);
    CHECK_FALSE(res.feasible);
}

TEST_CASE("shooting: flat chord and degenerate endpoints") {
    MetricField f = make_minkowski();
    BackgroundMetric h = BackgroundMetric::euclidean(4);
    ShootResult res = shoot_connect(f, VecN(4), VecN{2, 0.5, 0.5, 0}, 1e-10, h);
    REQUIRE(res.found);
    CHECK(res.miss <= 1e-10);
    for (int a = 0; a < 4; ++a)
        CHECK(res.initial_velocity[a] ==
              doctest::Approx(VecN{2, 0.5, 0.5, 0}[a]).epsilon(1e-8));
    CHECK_THROWS_AS(shoot_connect(f, VecN(4), VecN(4), 1e-8, h), InvalidInput);
}

TEST_CASE("weak-field light bending matches the leading-order rate") {
    // b = 80m keeps the higher-order corrections inside a 5% budget
    MetricField f = make_schwarzschild_cartesian(1.0, 290.0, 2.4);
    BackgroundMetric h = BackgroundMetric::euclidean(4);
    const double b = 80.0, X = 250.0;
    VecN x0{0.0, -X, b, 0.0};
    MatN g = eval_metric_raw(f, x0);
    VecN u{0.0, 1.0, 0.0, 0.0};
    VecN v0 = u;
    v0[0] = null_time_component(g, u);
    IntegratorOptions opts;
    CurveTrajectory ray = integrate_geodesic(f, x0, v0, 0.0, 2.05 * X, opts);
    REQUIRE(ray.points.back()[1] > X * 0.8);

    // shoot at the far endpoint and measure the bend of the connecting ray
    ShootResult shot = shoot_connect(f, x0, ray.points.back(), 1e-6, h);
    REQUIRE(shot.found);
    const VecN va = shot.path.velocities.front();
    const VecN vb = shot.path.velocities.back();
    const double bend = std::abs(std::atan2(vb[2], vb[1]) - std::atan2(va[2], va[1]));
    const double xa = std::abs(x0[1]), xb = std::abs(ray.points.back()[1]);
    const double lead = (2.0 / b) * (xa / std::hypot(xa, b) + xb / std::hypot(xb, b));
    CHECK(bend == doctest::Approx(lead).epsilon(0.05));
}

TEST_CASE("branching probe: flat and C^{1,1} stay linear, kink reported") {
    BackgroundMetric h = BackgroundMetric::euclidean(4);
    const std::vector<double> sigmas = {1e-2, 1e-3, 1e-4};

    MetricField mink = make_minkowski();
    FunnelReport flat = branching_probe(mink, VecN(4), VecN{1, 1, 0, 0}, sigmas, h);
    CHECK_FALSE(flat.flagged);
    for (const auto& row : flat.rows)
        CHECK(row.ratio == doctest::Approx(flat.rows.front().ratio).epsilon(1e-6));

    MetricField c11 = make_c11_model();
    VecN x0{0.0, 0.0, 0.0, 0.0};
    MatN g = eval_metric_raw(c11, x0);
    VecN u{0.0, 1.0, 0.0, 0.0};
    VecN v0 = u;
    v0[0] = null_time_component(g, u);
    FunnelReport lip = branching_probe(c11, x0, v0, sigmas, h);
    CHECK_FALSE(lip.flagged);
    const double rmax = std::max({lip.rows[0].ratio, lip.rows[1].ratio, lip.rows[2].ratio});
    const double rmin = std::min({lip.rows[0].ratio, lip.rows[1].ratio, lip.rows[2].ratio});
    CHECK(rmax / rmin <= 2.0);

    MetricField c1 = make_c1_model();
    FunnelReport kink = branching_probe(c1, x0, v0, sigmas, h);
    CHECK(kink.rows.size() == 3);
    CHECK_FALSE(kink.note.empty());
}
