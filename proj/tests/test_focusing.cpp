#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "conelab/focusing.hpp"

using namespace conelab;

namespace {

// ingoing null generator from the r=2 sphere in the flat chart
CurveTrajectory flat_ingoing(const MetricField& f, double r0, double t_end) {
    VecN x0{0.0, r0, 0.0, 0.0};
    VecN v0{1.0, -1.0, 0.0, 0.0};
    return integrate_geodesic(f, x0, v0, 0.0, t_end);
}

}  // namespace

TEST_CASE("threshold formula values") {
    CHECK(delta_threshold(1.0, 2.0, 4) == 6.0);  // exact
    CHECK(delta_threshold(2.0, 1.0, 4) == doctest::Approx(1.5).epsilon(1e-15));
    // b c -> 1+ sends the threshold to 0+
    CHECK(delta_threshold(1.0 + 1e-9, 1.0, 4) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(delta_threshold(1.0 + 1e-9, 1.0, 4) > 0.0);
    CHECK_THROWS_AS(delta_threshold(0.5, 1.0, 4), InvalidInput);   // b <= 1/c
    CHECK_THROWS_AS(delta_threshold(1.0, -1.0, 4), InvalidInput);
    CHECK_THROWS_AS(delta_threshold(1.0, 2.0, 2), InvalidInput);
}

TEST_CASE("flat ingoing sphere: closed-form lhs and the verdict flip at b = 1/c") {
    MetricField f = make_minkowski(4, 8.0);
    CurveTrajectory g = flat_ingoing(f, 2.0, 3.9);
    const double k = 1.0;  // trace convergence 2/r at r=2

    // Ric = 0 and f = 1 - t/b make lhs = (n-2)/b to quadrature precision
    for (double b : {0.5, 1.0, 2.0, 3.5}) {
        FocusingReport rep = focusing_functional(f, g, k, b);
        CHECK(std::abs(rep.lhs - 2.0 / b) <= 1e-10);
        CHECK(rep.rhs == doctest::Approx(k).epsilon(1e-14));
        CHECK(rep.c == doctest::Approx(0.5).epsilon(1e-14));
    }

    // per-direction convergence c = 1/2: the flip sits at b = 1/c = 2 = r,
    // exactly the center-crossing scale of the ingoing congruence
    FocusingReport below = focusing_functional(f, g, k, 1.0 / 0.5 - 0.01);
    FocusingReport above = focusing_functional(f, g, k, 1.0 / 0.5 + 0.01);
    CHECK(below.verdict == FocusingVerdict::kInconclusive);
    CHECK(above.verdict == FocusingVerdict::kFocalPointPredicted);
}

TEST_CASE("flat sphere verdicts at the spec example horizons") {
    MetricField f = make_minkowski(4, 8.0);
    CurveTrajectory g = flat_ingoing(f, 2.0, 3.9);
    // b = 2: lhs = 1 <= rhs = 1 -> predicted at the sharp scale
    FocusingReport at2 = focusing_functional(f, g, 1.0, 2.0);
    CHECK(at2.lhs == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(at2.verdict == FocusingVerdict::kFocalPointPredicted);
    // b = 0.5: lhs = 4 > 1 -> inconclusive, and indeed no focal point by 0.5
    FocusingReport at05 = focusing_functional(f, g, 1.0, 0.5);
    CHECK(at05.lhs == doctest::Approx(4.0).epsilon(1e-10));
    CHECK(at05.verdict == FocusingVerdict::kInconclusive);
}

TEST_CASE("maximizing bound: sweep, outgoing sentinel, monotonicity, sufficiency") {
    MetricField f = make_minkowski(4, 8.0);
    CurveTrajectory g = flat_ingoing(f, 2.0, 3.9);
    std::vector<double> grid;
    for (double b = 0.25; b <= 3.80; b += 0.25) grid.push_back(b);

    auto bound = maximizing_bound(f, g, 1.0, grid);
    REQUIRE(bound.has_value());
    // smallest grid entry at or beyond 1/c = 2
    CHECK(*bound == doctest::Approx(2.0));
    // sufficiency: the actual focal point (center crossing at t = r = 2)
    // occurs at parameter <= every predicted bound
    for (double b : grid)
        if (focusing_functional(f, g, 1.0, b).verdict ==
            FocusingVerdict::kFocalPointPredicted)
            CHECK(2.0 <= b + 1e-12);
    // once predicted, stays predicted for larger b (Ric >= 0)
    bool seen = false;
    for (double b : grid) {
        const bool pred = focusing_functional(f, g, 1.0, b).verdict ==
                          FocusingVerdict::kFocalPointPredicted;
        if (seen) CHECK(pred);
        seen = seen || pred;
    }
    CHECK(seen);

    // outgoing direction: negative convergence never predicts
    auto out_bound = maximizing_bound(f, g, -1.0, grid);
    CHECK_FALSE(out_bound.has_value());
}

TEST_CASE("threshold consistency: min Ric >= -delta and b > 1/c imply the verdict") {
    MetricField f = make_minkowski(4, 8.0);
    CurveTrajectory g = flat_ingoing(f, 2.0, 3.9);
    const double k = 1.0, c = 0.5;
    for (double b : {2.1, 2.5, 3.0, 3.5}) {
        FocusingReport rep = focusing_functional(f, g, k, b);
        const double thr = delta_threshold(b, c, 4);
        if (rep.min_ric >= -thr)
            CHECK(rep.verdict == FocusingVerdict::kFocalPointPredicted);
    }
}

TEST_CASE("errors: non-null start, too-short trajectories, raw C1 curvature") {
    MetricField f = make_minkowski(4, 8.0);
    CurveTrajectory timelike = integrate_geodesic(f, VecN(4), VecN{1, 0, 0, 0}, 0.0, 1.0);
    CHECK_THROWS_AS(focusing_functional(f, timelike, 1.0, 0.5), InvalidInput);
    CurveTrajectory g = flat_ingoing(f, 2.0, 1.0);
    CHECK_THROWS_AS(focusing_functional(f, g, 1.0, 2.0), InvalidInput);
    // a raw C1 field cannot supply the curvature term: mollify first
    MetricField c1 = make_c1_model(8.0);
    VecN x0{0.0, -0.5, 0.0, 0.0};
    MatN gc = eval_metric_raw(c1, x0);
    VecN u{0.0, 1.0, 0.0, 0.0};
    VecN v0 = u;
    v0[0] = null_time_component(gc, u);
    CurveTrajectory null_c1 = integrate_geodesic(c1, x0, v0, 0.0, 1.0);
    CHECK_THROWS_AS(focusing_functional(c1, null_c1, 1.0, 0.5), RegularityError);
}

TEST_CASE("pg radial generator: the core cuts it exactly at the sharp scale") {
    // radial ingoing null rays have dr/dlambda = -E with E = 1 + sqrt(2m/r0),
    // and the per-direction convergence of the r0-sphere is c = E/r0, so the
    // affine distance to r = 0 equals 1/c exactly: the ray always dies at the
    // excluded core strictly before the inequality can fire. That death is
    // the incompleteness witness of the same mechanism.
    MetricField f = make_painleve_gullstrand(1.0, 1.7, 0.05);
    HypersurfaceData slice = HypersurfaceData::constant_slice(0.0);
    SurfaceLevelSet surf = SurfaceLevelSet::sphere(4, 1.0);
    VecN p{0.0, 1.0, 0.0, 0.0};
    SurfaceNormals nor = build_normals(f, slice, surf, p);
    const auto [kp, km] = convergence_pair(f, slice, surf, p);
    (void)kp;
    const double c = km / 2.0;
    CHECK(c > 2.0);

    CurveTrajectory g = integrate_geodesic(f, p, nor.K_minus, 0.0, 1.0);
    CHECK(g.exited_domain);
    const double E = 1.0 + std::sqrt(2.0);
    CHECK(g.t_end() == doctest::Approx((1.0 - 0.05) / E).epsilon(1e-3));
    CHECK(g.t_end() < 1.0 / c);

    std::vector<double> grid;
    for (double b = 0.05; b <= 1.0; b += 0.05) grid.push_back(b);
    auto bound = maximizing_bound(f, g, km, grid);
    CHECK_FALSE(bound.has_value());  // dies before the admissible horizon
}

TEST_CASE("contracting matter metric: positive Ric fires the verdict before 1/c") {
    // g = -dt^2 + a(t)^2 dx^2 with a = 1 - beta t^2: Ric(null, null) > 0, so
    // the integral term pushes lhs below the vacuum value and the verdict
    // fires strictly inside the vacuum-sharp scale 1/c while the ray is alive.
    const double beta = 0.08;
    Box box;
    box.lo = VecN{-2.4, -6.0, -6.0, -6.0};
    box.hi = VecN{2.4, 6.0, 6.0, 6.0};
    MetricField f = make_from_closures(
        4, box, Regularity::kSmooth, "frw-contracting",
        [beta](const VecN& x, MatN& g) {
            const double a = 1.0 - beta * x[0] * x[0];
            g = MatN(4);
            g(0, 0) = -1.0;
            for (int i = 1; i < 4; ++i) g(i, i) = a * a;
        },
        [beta](const VecN& x, Deriv3& d) {
            const double a = 1.0 - beta * x[0] * x[0];
            d = Deriv3(4);
            for (int i = 1; i < 4; ++i) d(0, i, i) = 2.0 * a * (-2.0 * beta * x[0]);
        },
        1u << 0);

    HypersurfaceData slice = HypersurfaceData::constant_slice(0.0);
    SurfaceLevelSet surf = SurfaceLevelSet::sphere(4, 2.0);
    VecN p{0.0, 2.0, 0.0, 0.0};
    SurfaceNormals nor = build_normals(f, slice, surf, p);
    const auto [kp, km] = convergence_pair(f, slice, surf, p);
    (void)kp;
    const double c = km / 2.0;  // = 1/2 at t=0 (a=1, adot=0)
    CHECK(c == doctest::Approx(0.5).epsilon(1e-4));

    CurveTrajectory g = integrate_geodesic(f, p, nor.K_minus, 0.0, 2.2);
    REQUIRE(g.t_end() >= 2.0);
    std::vector<double> grid;
    for (double b = 0.1; b <= 2.2; b += 0.1) grid.push_back(b);
    auto bound = maximizing_bound(f, g, km, grid);
    REQUIRE(bound.has_value());
    CHECK(*bound < 1.0 / c);  // strictly earlier than the vacuum scale
    FocusingReport rep = focusing_functional(f, g, km, *bound);
    CHECK(rep.min_ric > 0.0);
    CHECK(rep.verdict == FocusingVerdict::kFocalPointPredicted);
}
