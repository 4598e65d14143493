#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "conelab/linalg.hpp"

using namespace conelab;

TEST_CASE("inverse round trip") {
    MatN m(4);
    m(0, 0) = -2.0;
    m(1, 1) = 1.5;
    m(2, 2) = 3.0;
    m(3, 3) = 0.5;
    m(0, 1) = m(1, 0) = 0.3;
    m(2, 3) = m(3, 2) = -0.2;
    MatN inv = inverse(m);
    // m * inv == id
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            double s = 0;
            for (int k = 0; k < 4; ++k) s += m(i, k) * inv(k, j);
            CHECK(s == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
        }
}

TEST_CASE("singular matrix throws") {
    MatN m(3);
    m(0, 0) = 1;
    m(0, 1) = 2;
    m(1, 0) = 2;
    m(1, 1) = 4;  // rank deficient block
    CHECK_THROWS_AS(inverse(m), InvalidMetric);
}

TEST_CASE("symmetric eigenvalues of a diagonal + rotation") {
    MatN m(3);
    m(0, 0) = 2.0;
    m(1, 1) = -1.0;
    m(2, 2) = 5.0;
    m(0, 2) = m(2, 0) = 0.5;
    VecN ev = sym_eigenvalues(m);
    double prod = 1, trace = 0;
    for (int i = 0; i < 3; ++i) {
        prod *= ev[i];
        trace += ev[i];
    }
    CHECK(trace == doctest::Approx(6.0).epsilon(1e-10));
    // det = 2*(-1)*5 - 0.5^2*(-1) = -10 + 0.25
    CHECK(prod == doctest::Approx(-9.75).epsilon(1e-10));
}

TEST_CASE("solve") {
    MatN m(2);
    m(0, 0) = 3;
    m(0, 1) = 1;
    m(1, 0) = 1;
    m(1, 1) = 2;
    VecN b{5.0, 5.0};
    VecN x = solve(m, b);
    CHECK(x[0] == doctest::Approx(1.0));
    CHECK(x[1] == doctest::Approx(2.0));
}

TEST_CASE("quad_form and matvec") {
    MatN g(2);
    g(0, 0) = -1;
    g(1, 1) = 1;
    VecN v{2.0, 1.0};
    CHECK(quad_form(g, v, v) == doctest::Approx(-3.0));
    VecN w = matvec(g, v);
    CHECK(w[0] == doctest::Approx(-2.0));
    CHECK(w[1] == doctest::Approx(1.0));
}
