#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "conelab/chart_metric.hpp"

using namespace conelab;

TEST_CASE("minkowski evaluation") {
    MetricField f = make_minkowski();
    VecN x{0.3, -1.0, 2.0, 0.5};
    MatN g = eval_metric(f, x);
    CHECK(g(0, 0) == doctest::Approx(-1.0));
    for (int i = 1; i < 4; ++i) CHECK(g(i, i) == doctest::Approx(1.0));
    CHECK(g(0, 1) == 0.0);
}

TEST_CASE("c1 model evaluation at x1=1") {
    MetricField f = make_c1_model();
    VecN x{0.0, 1.0, 0.0, 0.0};
    MatN g = eval_metric(f, x);
    CHECK(g(0, 0) == doctest::Approx(-1.0));
    CHECK(g(1, 1) == doctest::Approx(2.0));
    CHECK(g(2, 2) == doctest::Approx(1.0));
    CHECK(g(3, 3) == doctest::Approx(1.0));
}

TEST_CASE("schwarzschild spherical g_tt at r=4") {
    MetricField f = make_schwarzschild_spherical(1.0, 2.5, 20.0);
    VecN x{0.0, 4.0, 1.2, 0.0};
    MatN g = eval_metric(f, x);
    CHECK(g(0, 0) == doctest::Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("domain error outside the chart") {
    MetricField f = make_minkowski(4, 2.0);
    VecN x{0.0, 3.0, 0.0, 0.0};
    CHECK_THROWS_AS(eval_metric(f, x), DomainError);
}

TEST_CASE("finite differences match analytic derivatives on schwarzschild") {
    MetricField f = make_schwarzschild_cartesian(1.0, 8.0, 2.4);
    MetricField fd = f;
    fd.derivs = nullptr;  // force the FD path
    VecN x{0.0, 4.0, 1.5, -2.0};
    Deriv3 da = metric_first_derivs(f, x);
    Deriv3 dn = metric_first_derivs(fd, x);
    double worst = 0;
    for (int k = 0; k < 4; ++k)
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                worst = std::max(worst, std::abs(da(k, i, j) - dn(k, i, j)));
    CHECK(worst <= 1e-6);
}

TEST_CASE("causal character with the null band") {
    MetricField f = make_minkowski();
    VecN x(4);
    CHECK(causal_character(f, {x, VecN{1, 0, 0, 0}}) == CausalCharacter::kTimelike);
    CHECK(causal_character(f, {x, VecN{1, 1, 0, 0}}) == CausalCharacter::kNull);
    CHECK(causal_character(f, {x, VecN{1, 2, 0, 0}}) == CausalCharacter::kSpacelike);
    CHECK_THROWS_AS(causal_character(f, {x, VecN{0, 0, 0, 0}}), InvalidInput);
}

TEST_CASE("c1 model: (1,1,0,0) is spacelike at x1=1") {
    MetricField f = make_c1_model();
    VecN x{0.0, 1.0, 0.0, 0.0};
    // g(v,v) = -1 + 2 = 1
    CHECK(causal_character(f, {x, VecN{1, 1, 0, 0}}) == CausalCharacter::kSpacelike);
}

TEST_CASE("causal character is scale invariant") {
    MetricField f = make_c1_model();
    VecN x{0.0, 0.7, -0.2, 0.1};
    for (VecN v : {VecN{1, 0.2, 0.1, 0}, VecN{1, 1.4, 0, 0}, VecN{0.5, 1, 1, 1}}) {
        const CausalCharacter base = causal_character(f, {x, v});
        for (double lam : {0.5, 2.0, 10.0}) {
            VecN w = v;
            w *= lam;
            CHECK(causal_character(f, {x, w}) == base);
        }
    }
}

TEST_CASE("future orientation against the chart future field") {
    MetricField f = make_minkowski();
    VecN x(4);
    CHECK(is_future_directed(f, {x, VecN{1, 0.5, 0, 0}}));
    CHECK_FALSE(is_future_directed(f, {x, VecN{-1, 0.5, 0, 0}}));
}

TEST_CASE("null solve puts samples on the cone") {
    MetricField f = make_schwarzschild_cartesian(1.0, 8.0, 2.4);
    BackgroundMetric h = BackgroundMetric::euclidean(4);
    VecN x{0.0, 3.0, 2.0, -1.0};
    MatN g = eval_metric_raw(f, x);
    for (const VecN& u : sphere_directions(4, 128, h)) {
        const double tau = null_time_component(g, u);
        VecN X = u;
        X[0] = tau;
        CHECK(std::abs(quad_form(g, X, X)) <= 1e-10);
    }
}

TEST_CASE("cone comparison") {
    BackgroundMetric h = BackgroundMetric::euclidean(4);
    MetricField g1 = make_minkowski();
    MetricField g2 = make_minkowski();
    g2.components = [](const VecN&, MatN& g) {
        g = MatN(4);
        g(0, 0) = -1.0;
        for (int i = 1; i < 4; ++i) g(i, i) = 0.5;  // wider cones
    };
    VecN x(4);
    CHECK(cone_compare(g1, g2, x, 128, h) == ConeOrder::kNarrower);
    CHECK(cone_compare(g1, g1, x, 128, h) == ConeOrder::kNotNarrower);
    CHECK(cone_compare(g2, g1, x, 128, h) == ConeOrder::kNotNarrower);
    CHECK_THROWS_AS(cone_compare(g1, g2, x, 50, h), InvalidInput);
}

TEST_CASE("signature guard") {
    MetricField f = make_minkowski();
    f.components = [](const VecN&, MatN& g) {
        g = MatN(4);
        g(0, 0) = 1.0;  // two positive, rest zero: not Lorentzian
        g(1, 1) = 1.0;
    };
    VecN x(4);
    CHECK_THROWS_AS(eval_metric(f, x), InvalidMetric);
}

TEST_CASE("pg future field is timelike across the horizon") {
    MetricField f = make_painleve_gullstrand(1.0, 1.7, 0.05);
    for (double r : {0.3, 0.8, 1.2, 1.6}) {
        VecN x{0.0, r, 0.0, 0.0};
        MatN g = eval_metric(f, x);
        VecN u = f.future_at(x);
        CHECK(quad_form(g, u, u) < 0);
    }
}

TEST_CASE("null cone solve stays on the cone through tilted interiors") {
    MetricField f = make_painleve_gullstrand(1.0, 1.7, 0.05);
    BackgroundMetric h = BackgroundMetric::euclidean(4);
    for (double r : {0.4, 0.9, 1.5}) {
        VecN x{0.0, 0.0, r, 0.0};
        MatN g = eval_metric_raw(f, x);
        VecN fut = f.future_at(x);
        for (const VecN& u : sphere_directions(4, 128, h)) {
            VecN X = null_cone_vector(g, fut, u);
            CHECK(std::abs(quad_form(g, X, X)) <= 1e-10 * std::max(1.0, dot(X, X)));
            CHECK(quad_form(g, X, fut) < 0);  // future nappe
        }
        CHECK(cone_compare(f, f, x, 128, h) == ConeOrder::kNotNarrower);
    }
}
