#pragma once

#include <memory>
#include <string>

#include "conelab/linalg.hpp"

namespace conelab {

// Arithmetic expressions over chart coordinates for scenario-defined metric
// components: +, -, *, /, ^, abs, sqrt, sin, cos, exp, log, min, max, sign,
// pow. Coordinates: t (or x0), x (x1), y (x2), z (x3).
class Expr {
public:
    static Expr parse(const std::string& text);

    double eval(const VecN& coords) const;
    // true if the expression references coordinate `axis`
    bool uses_axis(int axis) const;

    Expr();
    ~Expr();
    Expr(Expr&&) noexcept;
    Expr& operator=(Expr&&) noexcept;
    Expr(const Expr&);
    Expr& operator=(const Expr&);

    struct Node;

private:
    std::shared_ptr<const Node> root_;
};

}  // namespace conelab
