#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "conelab/curvature.hpp"
#include "conelab/regularizer.hpp"

using namespace conelab;

TEST_CASE("mollifier kernels have unit mass") {
    for (int d = 1; d <= 3; ++d) {
        MollifierKernel k = MollifierKernel::marginal(4, d);
        CHECK(std::abs(k.mass_quadrature() - 1.0) <= 1e-10);
    }
}

TEST_CASE("constant metrics are fixed points of mollification") {
    MetricField f = make_minkowski();
    MetricField m = mollify(f, 0.1);
    CHECK(m.regularity == Regularity::kSmooth);
    VecN x{0.0, 1.0, -2.0, 0.5};
    MatN g = eval_metric_raw(m, x);
    CHECK(g(0, 0) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(g(1, 1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("linear components are fixed by the symmetric kernel") {
    MetricField f = make_minkowski(4, 3.0);
    f.name = "linear";
    f.dependence_mask = 1u << 1;
    f.components = [](const VecN& x, MatN& g) {
        g = MatN(4);
        g(0, 0) = -1.0;
        g(1, 1) = 3.0 + x[1];  // stays positive on the box
        g(2, 2) = 1.0;
        g(3, 3) = 1.0;
    };
    f.derivs = nullptr;
    f.kink_planes.assign(4, {});
    MetricField m = mollify(f, 0.15);
    for (double x1 : {-2.0, -0.3, 0.0, 1.7}) {
        VecN x{0.0, x1, 0.0, 0.0};
        MatN g = eval_metric_raw(m, x);
        CHECK(g(1, 1) == doctest::Approx(3.0 + x1).epsilon(1e-9));
    }
}

TEST_CASE("mollification error on the c1 model decays like eps^{3/2}") {
    MetricField f = make_c1_model();
    std::vector<double> eps = {0.2, 0.1, 0.05, 0.025};
    std::vector<double> sup_err;
    for (double e : eps) {
        MetricField m = mollify(f, e);
        double sup = 0;
        MatN gm(4), gb(4);
        for (int i = 0; i <= 600; ++i) {
            VecN x{0.0, -1.2 + 2.4 * i / 600.0, 0.0, 0.0};
            if (!m.domain.contains(x)) continue;
            m.components(x, gm);
            f.components(x, gb);
            sup = std::max(sup, std::abs(gm(1, 1) - gb(1, 1)));
        }
        sup_err.push_back(sup);
    }
    // log-log slope across the sweep
    const double slope = std::log(sup_err.front() / sup_err.back()) /
                         std::log(eps.front() / eps.back());
    CHECK(slope == doctest::Approx(1.5).epsilon(0.12));
}

TEST_CASE("mollify is linear in the metric") {
    MetricField f = make_c1_model();
    MetricField f2 = f;  // doubled deviation from flat
    f2.components = [](const VecN& x, MatN& g) {
        g = MatN(4);
        g(0, 0) = -1.0;
        g(1, 1) = 1.0 + 2.0 * std::pow(std::abs(x[1]), 1.5);
        g(2, 2) = 1.0;
        g(3, 3) = 1.0;
    };
    f2.derivs = nullptr;
    MetricField m1 = mollify(f, 0.1);
    MetricField m2 = mollify(f2, 0.1);
    for (double x1 : {-0.4, 0.0, 0.03, 0.8}) {
        VecN x{0.0, x1, 0.0, 0.0};
        MatN a(4), b(4);
        m1.components(x, a);
        m2.components(x, b);
        // (m2 - id-part) = 2 (m1 - id-part) pointwise
        CHECK(std::abs((b(1, 1) - 1.0) - 2.0 * (a(1, 1) - 1.0)) <= 1e-10);
    }
}

TEST_CASE("eps too large for the chart is a domain error") {
    MetricField f = make_c1_model(0.4);
    CHECK_THROWS_AS(mollify(f, 0.5), DomainError);
}

TEST_CASE("family calibration and cone nesting on the c1 model") {
    MetricField f = make_c1_model();
    BackgroundMetric h = BackgroundMetric::euclidean(4);
    RegularizationFamily fam =
        build_regularization_family(f, {0.2, 0.1, 0.05, 0.025}, h, 500, 128);
    CHECK(fam.c_corr > 0);
    CHECK(fam.verification_points.size() >= 500);

    // nesting at every verification point, every eps, both sides
    for (double eps : fam.eps_list) {
        MetricField gn = narrow_member(fam, eps);
        MetricField gw = widen_member(fam, eps);
        int narrow_ok = 0, widen_ok = 0;
        for (const VecN& x : fam.verification_points) {
            if (cone_compare(gn, f, x, 100, h) == ConeOrder::kNarrower) ++narrow_ok;
            if (cone_compare(f, gw, x, 100, h) == ConeOrder::kNarrower) ++widen_ok;
        }
        CHECK(narrow_ok == static_cast<int>(fam.verification_points.size()));
        CHECK(widen_ok == static_cast<int>(fam.verification_points.size()));
    }
}

TEST_CASE("minkowski family: correction is the whole difference") {
    MetricField f = make_minkowski();
    BackgroundMetric h = BackgroundMetric::euclidean(4);
    RegularizationFamily fam = build_regularization_family(f, {0.2, 0.1}, h, 100, 100);
    MetricField gn = narrow_member(fam, 0.1);
    VecN x{0.0, 0.4, -0.2, 1.0};
    MatN g = eval_metric_raw(gn, x);
    // g*rho = eta exactly; u_flat = (-1,0,0,0): g_check = eta + lambda dt^2
    CHECK(g(0, 0) == doctest::Approx(-1.0 + fam.c_corr * 0.1).epsilon(1e-12));
    CHECK(g(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cone_compare(gn, f, x, 200, h) == ConeOrder::kNarrower);
}

TEST_CASE("convergence report on the c1 model") {
    MetricField f = make_c1_model();
    BackgroundMetric h = BackgroundMetric::euclidean(4);
    RegularizationFamily fam =
        build_regularization_family(f, {0.2, 0.1, 0.05, 0.025}, h, 200, 100);
    Box K = fam.mollified.front().domain;
    ConvergenceReport rep = convergence_report(fam, K);
    REQUIRE(rep.rows.size() == 4);

    // the correction term is lambda * dt^2 here, so the ratio is exactly c_corr
    for (const auto& row : rep.rows)
        CHECK(row.ratio_narrow == doctest::Approx(fam.c_corr).epsilon(0.05));
    CHECK(rep.ratios_bounded);
    // eq-style linear bound: ratios constant within 5% across the sweep
    const double r0 = rep.rows.front().ratio_narrow;
    for (const auto& row : rep.rows)
        CHECK(std::abs(row.ratio_narrow - r0) <= 0.05 * r0);

    CHECK(rep.c0_converges);
    CHECK(rep.c1_monotone);
    // derivative sup-error of the mollification itself decays along the sweep
    CHECK(rep.rows.back().sup_dmoll_minus_dbase < rep.rows.front().sup_dmoll_minus_dbase);
    CHECK(rep.pass);
}

TEST_CASE("narrowed members admit curvature evaluation") {
    MetricField f = make_c1_model();
    BackgroundMetric h = BackgroundMetric::euclidean(4);
    RegularizationFamily fam = build_regularization_family(f, {0.1, 0.05}, h, 100, 100);
    for (double eps : fam.eps_list) {
        MetricField gn = narrow_member(fam, eps);
        CHECK(gn.regularity == Regularity::kSmooth);
        VecN x{0.0, 0.0, 0.0, 0.0};
        RiemannAt R = riemann(gn, x);  // must not throw
        RicciAt ric = ricci(gn, x);
        // flat in disguise: curvature of the regularized member stays small
        VecN v{1.0, 1.0, 0.0, 0.0};
        const double rvv = quad_form(ric.ric, v, v);
        CHECK(std::isfinite(rvv));
        CHECK(std::abs(rvv) <= 1e-4);
        (void)R;
    }
}
