#pragma once

#include <vector>

#include "conelab/linalg.hpp"

namespace conelab {

// Interpolating cubic B-spline on a uniform grid, up to three active axes.
// C^2, so fields backed by it admit curvature evaluation by differencing
// first derivatives.
class UniformCubicSpline {
public:
    // axes: number of active axes (1..3); dims: samples per axis;
    // lo/spacing: grid geometry per axis; values: row-major samples
    // (last axis fastest).
    UniformCubicSpline() = default;
    UniformCubicSpline(int axes, const std::vector<int>& dims,
                       const std::vector<double>& lo, const std::vector<double>& spacing,
                       std::vector<double> values);

    double eval(const double* x) const;
    // d/dx_axis
    double eval_deriv(const double* x, int axis) const;

    int axes() const { return axes_; }

private:
    int axes_ = 0;
    std::vector<int> dims_;
    std::vector<double> lo_, h_;
    std::vector<double> coef_;  // B-spline coefficients, same layout as samples

    void weights(double t, double* w) const;
    void dweights(double t, double* w) const;
};

}  // namespace conelab
