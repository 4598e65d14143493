#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "conelab/errors.hpp"
#include "conelab/expr.hpp"

using namespace conelab;

TEST_CASE("arithmetic and precedence") {
    VecN x{2.0, 3.0, 0.0, 0.0};
    CHECK(Expr::parse("1 + 2*3").eval(x) == doctest::Approx(7.0));
    CHECK(Expr::parse("(1+2)*3").eval(x) == doctest::Approx(9.0));
    CHECK(Expr::parse("2^3^1").eval(x) == doctest::Approx(8.0));
    CHECK(Expr::parse("-t + x").eval(x) == doctest::Approx(1.0));
    CHECK(Expr::parse("t/2 - 1").eval(x) == doctest::Approx(0.0));
}

TEST_CASE("coordinates by name and index") {
    VecN x{1.0, 2.0, 3.0, 4.0};
    CHECK(Expr::parse("t + x + y + z").eval(x) == doctest::Approx(10.0));
    CHECK(Expr::parse("x0 + x1 + x2 + x3").eval(x) == doctest::Approx(10.0));
}

TEST_CASE("the low-regularity power form") {
    Expr e = Expr::parse("1 + abs(x)^1.5");
    VecN x(4);
    x[1] = 1.0;
    CHECK(e.eval(x) == doctest::Approx(2.0));
    x[1] = -0.25;
    CHECK(e.eval(x) == doctest::Approx(1.0 + std::pow(0.25, 1.5)));
    CHECK(e.uses_axis(1));
    CHECK_FALSE(e.uses_axis(0));
}

TEST_CASE("functions") {
    VecN x{0.5, 0.0, 0.0, 0.0};
    CHECK(Expr::parse("exp(t)").eval(x) == doctest::Approx(std::exp(0.5)));
    CHECK(Expr::parse("min(t, 0.2)").eval(x) == doctest::Approx(0.2));
    CHECK(Expr::parse("max(t, 0.2)").eval(x) == doctest::Approx(0.5));
    CHECK(Expr::parse("sign(-t)").eval(x) == doctest::Approx(-1.0));
    CHECK(Expr::parse("|1 - 3|").eval(x) == doctest::Approx(2.0));
    CHECK(Expr::parse("pow(2, t)").eval(x) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("parse errors carry context") {
    CHECK_THROWS_AS(Expr::parse("1 +"), ConfigError);
    CHECK_THROWS_AS(Expr::parse("foo(1)"), ConfigError);
    CHECK_THROWS_AS(Expr::parse("1 2"), ConfigError);
    CHECK_THROWS_AS(Expr::parse("(1"), ConfigError);
}
