#include "conelab/spline.hpp"

#include <cmath>

#include "conelab/errors.hpp"

namespace conelab {

namespace {

// Solve the interpolation system along one line: coefficients c_0..c_{N+1}
// with (c_i + 4 c_{i+1} + c_{i+2})/6 = f_i and natural end conditions, which
// give c_1 = f_0, c_N = f_{N-1} directly.
void spline_line(const double* f, int stride, int N, double* c, int cstride,
                 std::vector<double>& scratch) {
    if (N == 1) {
        c[0] = c[cstride] = c[2 * cstride] = f[0];
        return;
    }
    scratch.resize(static_cast<size_t>(2 * N));
    double* d = scratch.data();       // rhs
    double* w = scratch.data() + N;   // sweep workspace

    // unknowns u_i = c_{i+1}, i = 0..N-1; u_0 = f_0, u_{N-1} = f_{N-1};
    // interior: u_{i-1} + 4 u_i + u_{i+1} = 6 f_i, i = 1..N-2
    d[0] = f[0];
    d[N - 1] = f[static_cast<size_t>((N - 1) * stride)];
    if (N > 2) {
        // Thomas algorithm on the interior block
        w[1] = 4.0;
        d[1] = 6.0 * f[static_cast<size_t>(stride)] - d[0];
        for (int i = 2; i <= N - 2; ++i) {
            const double m = 1.0 / w[i - 1];
            w[i] = 4.0 - m;
            d[i] = 6.0 * f[static_cast<size_t>(i * stride)] - m * d[i - 1];
        }
        d[N - 2] -= d[N - 1];
        d[N - 2] /= w[N - 2];
        for (int i = N - 3; i >= 1; --i) d[i] = (d[i] - d[i + 1]) / w[i];
    }
    for (int i = 0; i < N; ++i) c[static_cast<size_t>((i + 1) * cstride)] = d[i];
    // natural ends: c_0 = 2 c_1 - c_2, c_{N+1} = 2 c_N - c_{N-1}
    c[0] = 2.0 * c[cstride] - c[2 * cstride];
    c[static_cast<size_t>((N + 1) * cstride)] =
        2.0 * c[static_cast<size_t>(N * cstride)] - c[static_cast<size_t>((N - 1) * cstride)];
}

}  // namespace

UniformCubicSpline::UniformCubicSpline(int axes, const std::vector<int>& dims,
                                       const std::vector<double>& lo,
                                       const std::vector<double>& spacing,
                                       std::vector<double> values)
    : axes_(axes), dims_(dims), lo_(lo), h_(spacing) {
    if (axes < 1 || axes > 3) throw InvalidInput("UniformCubicSpline: 1..3 axes");
    // pad dims to 3
    std::vector<int> nd = dims_;
    nd.resize(3, 1);
    std::vector<int> cd = nd;
    for (int a = 0; a < axes_; ++a) cd[static_cast<size_t>(a)] += 2;

    // transform axis by axis, starting from the raw samples
    std::vector<double> cur = std::move(values);
    std::vector<int> cur_dims = nd;
    std::vector<double> scratch;
    for (int a = 0; a < axes_; ++a) {
        std::vector<int> next_dims = cur_dims;
        next_dims[static_cast<size_t>(a)] += 2;
        std::vector<double> next(
            static_cast<size_t>(next_dims[0]) * next_dims[1] * next_dims[2], 0.0);
        const int n0 = cur_dims[0], n1 = cur_dims[1], n2 = cur_dims[2];
        const int m1 = next_dims[1], m2 = next_dims[2];
        auto cidx = [&](int i, int j, int k) {
            return (static_cast<size_t>(i) * n1 + j) * n2 + k;
        };
        auto nidx = [&](int i, int j, int k) {
            return (static_cast<size_t>(i) * m1 + j) * m2 + k;
        };
        if (a == 0) {
            for (int j = 0; j < n1; ++j)
                for (int k = 0; k < n2; ++k)
                    spline_line(&cur[cidx(0, j, k)], n1 * n2, n0, &next[nidx(0, j, k)],
                                m1 * m2, scratch);
        } else if (a == 1) {
            for (int i = 0; i < n0; ++i)
                for (int k = 0; k < n2; ++k)
                    spline_line(&cur[cidx(i, 0, k)], n2, n1, &next[nidx(i, 0, k)], m2,
                                scratch);
        } else {
            for (int i = 0; i < n0; ++i)
                for (int j = 0; j < n1; ++j)
                    spline_line(&cur[cidx(i, j, 0)], 1, n2, &next[nidx(i, j, 0)], 1,
                                scratch);
        }
        cur = std::move(next);
        cur_dims = next_dims;
    }
    coef_ = std::move(cur);
    dims_ = dims;
    dims_.resize(3, 1);
}

void UniformCubicSpline::weights(double t, double* w) const {
    const double u = t, u2 = u * u, u3 = u2 * u;
    w[0] = (1.0 - 3.0 * u + 3.0 * u2 - u3) / 6.0;
    w[1] = (4.0 - 6.0 * u2 + 3.0 * u3) / 6.0;
    w[2] = (1.0 + 3.0 * u + 3.0 * u2 - 3.0 * u3) / 6.0;
    w[3] = u3 / 6.0;
}

void UniformCubicSpline::dweights(double t, double* w) const {
    const double u = t, u2 = u * u;
    w[0] = (-3.0 + 6.0 * u - 3.0 * u2) / 6.0;
    w[1] = (-12.0 * u + 9.0 * u2) / 6.0;
    w[2] = (3.0 + 6.0 * u - 9.0 * u2) / 6.0;
    w[3] = 3.0 * u2 / 6.0;
}

double UniformCubicSpline::eval(const double* x) const {
    int base[3] = {0, 0, 0};
    double w[3][4];
    int span[3] = {1, 1, 1};
    for (int a = 0; a < 3; ++a) {
        if (a < axes_) {
            const int N = dims_[static_cast<size_t>(a)];
            double t = (x[a] - lo_[static_cast<size_t>(a)]) / h_[static_cast<size_t>(a)];
            if (t < 0.0) t = 0.0;
            if (t > N - 1.0) t = N - 1.0;
            int j = static_cast<int>(std::floor(t));
            if (j > N - 2) j = N - 2;
            weights(t - j, w[a]);
            base[a] = j;
            span[a] = 4;
        } else {
            w[a][0] = 1.0;
        }
    }
    const int m1 = (axes_ > 1 ? dims_[1] + 2 : 1);
    const int m2 = (axes_ > 2 ? dims_[2] + 2 : 1);
    double acc = 0;
    for (int i = 0; i < span[0]; ++i)
        for (int j = 0; j < span[1]; ++j)
            for (int k = 0; k < span[2]; ++k) {
                const size_t idx =
                    (static_cast<size_t>(base[0] + i) * m1 + (base[1] + j)) * m2 +
                    (base[2] + k);
                acc += w[0][i] * w[1][j] * w[2][k] * coef_[idx];
            }
    return acc;
}

double UniformCubicSpline::eval_deriv(const double* x, int axis) const {
    int base[3] = {0, 0, 0};
    double w[3][4];
    int span[3] = {1, 1, 1};
    for (int a = 0; a < 3; ++a) {
        if (a < axes_) {
            const int N = dims_[static_cast<size_t>(a)];
            double t = (x[a] - lo_[static_cast<size_t>(a)]) / h_[static_cast<size_t>(a)];
            if (t < 0.0) t = 0.0;
            if (t > N - 1.0) t = N - 1.0;
            int j = static_cast<int>(std::floor(t));
            if (j > N - 2) j = N - 2;
            if (a == axis)
                dweights(t - j, w[a]);
            else
                weights(t - j, w[a]);
            base[a] = j;
            span[a] = 4;
        } else {
            w[a][0] = (a == axis) ? 0.0 : 1.0;
        }
    }
    if (axis >= axes_) return 0.0;
    const int m1 = (axes_ > 1 ? dims_[1] + 2 : 1);
    const int m2 = (axes_ > 2 ? dims_[2] + 2 : 1);
    double acc = 0;
    for (int i = 0; i < span[0]; ++i)
        for (int j = 0; j < span[1]; ++j)
            for (int k = 0; k < span[2]; ++k) {
                const size_t idx =
                    (static_cast<size_t>(base[0] + i) * m1 + (base[1] + j)) * m2 +
                    (base[2] + k);
                acc += w[0][i] * w[1][j] * w[2][k] * coef_[idx];
            }
    return acc / h_[static_cast<size_t>(axis)];
}

}  // namespace conelab
