#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "conelab/errors.hpp"

namespace conelab {

// Dense vectors/matrices with a fixed capacity and runtime dimension.
// Chart dimensions are small (n = 3..6), so everything lives on the stack.
inline constexpr int kMaxDim = 6;

struct VecN {
    int n = 0;
    std::array<double, kMaxDim> a{};

    VecN() = default;
    explicit VecN(int dim) : n(dim) {}
    VecN(std::initializer_list<double> vals) {
        n = static_cast<int>(vals.size());
        int i = 0;
        for (double v : vals) a[i++] = v;
    }

    double& operator[](int i) { return a[static_cast<size_t>(i)]; }
    double operator[](int i) const { return a[static_cast<size_t>(i)]; }

    VecN& operator+=(const VecN& o) {
        for (int i = 0; i < n; ++i) a[i] += o.a[i];
        return *this;
    }
    VecN& operator-=(const VecN& o) {
        for (int i = 0; i < n; ++i) a[i] -= o.a[i];
        return *this;
    }
    VecN& operator*=(double s) {
        for (int i = 0; i < n; ++i) a[i] *= s;
        return *this;
    }

    friend VecN operator+(VecN x, const VecN& y) { return x += y; }
    friend VecN operator-(VecN x, const VecN& y) { return x -= y; }
    friend VecN operator*(VecN x, double s) { return x *= s; }
    friend VecN operator*(double s, VecN x) { return x *= s; }
};

inline double dot(const VecN& x, const VecN& y) {
    double s = 0;
    for (int i = 0; i < x.n; ++i) s += x[i] * y[i];
    return s;
}

inline double norm2(const VecN& x) { return std::sqrt(dot(x, x)); }

inline VecN zero_vec(int n) { return VecN(n); }

inline VecN basis_vec(int n, int i) {
    VecN e(n);
    e[i] = 1.0;
    return e;
}

struct MatN {
    int n = 0;
    std::array<double, kMaxDim * kMaxDim> a{};

    MatN() = default;
    explicit MatN(int dim) : n(dim) {}

    double& operator()(int i, int j) { return a[static_cast<size_t>(i * n + j)]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i * n + j)]; }

    MatN& operator+=(const MatN& o) {
        for (int i = 0; i < n * n; ++i) a[i] += o.a[i];
        return *this;
    }
    MatN& operator-=(const MatN& o) {
        for (int i = 0; i < n * n; ++i) a[i] -= o.a[i];
        return *this;
    }
    MatN& operator*=(double s) {
        for (int i = 0; i < n * n; ++i) a[i] *= s;
        return *this;
    }
    friend MatN operator+(MatN x, const MatN& y) { return x += y; }
    friend MatN operator-(MatN x, const MatN& y) { return x -= y; }
    friend MatN operator*(MatN x, double s) { return x *= s; }
};

inline MatN identity_mat(int n) {
    MatN m(n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

inline MatN diag_mat(const VecN& d) {
    MatN m(d.n);
    for (int i = 0; i < d.n; ++i) m(i, i) = d[i];
    return m;
}

inline VecN matvec(const MatN& m, const VecN& x) {
    VecN y(m.n);
    for (int i = 0; i < m.n; ++i) {
        double s = 0;
        for (int j = 0; j < m.n; ++j) s += m(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

// x^T m y
inline double quad_form(const MatN& m, const VecN& x, const VecN& y) {
    double s = 0;
    for (int i = 0; i < m.n; ++i) {
        double r = 0;
        for (int j = 0; j < m.n; ++j) r += m(i, j) * y[j];
        s += x[i] * r;
    }
    return s;
}

inline double max_abs(const MatN& m) {
    double v = 0;
    for (int i = 0; i < m.n * m.n; ++i) v = std::max(v, std::abs(m.a[i]));
    return v;
}

// Gauss-Jordan with partial pivoting.
inline MatN inverse(const MatN& m) {
    const int n = m.n;
    MatN a = m;
    MatN inv = identity_mat(n);
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (std::abs(a(piv, col)) < 1e-300)
            throw InvalidMetric("singular matrix in inverse()");
        if (piv != col) {
            for (int j = 0; j < n; ++j) {
                std::swap(a(piv, j), a(col, j));
                std::swap(inv(piv, j), inv(col, j));
            }
        }
        const double d = 1.0 / a(col, col);
        for (int j = 0; j < n; ++j) {
            a(col, j) *= d;
            inv(col, j) *= d;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a(r, col);
            if (f == 0.0) continue;
            for (int j = 0; j < n; ++j) {
                a(r, j) -= f * a(col, j);
                inv(r, j) -= f * inv(col, j);
            }
        }
    }
    return inv;
}

// Solve m x = b for small n.
inline VecN solve(const MatN& m, const VecN& b) { return matvec(inverse(m), b); }

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
inline VecN sym_eigenvalues(const MatN& m) {
    const int n = m.n;
    MatN a = m;
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (off < 1e-30) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-18) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    VecN ev(n);
    for (int i = 0; i < n; ++i) ev[i] = a(i, i);
    return ev;
}

// Third-order array holding d_k g_ij.
struct Deriv3 {
    int n = 0;
    std::array<double, kMaxDim * kMaxDim * kMaxDim> a{};

    Deriv3() = default;
    explicit Deriv3(int dim) : n(dim) {}

    // (k, i, j) -> d_k g_ij
    double& operator()(int k, int i, int j) {
        return a[static_cast<size_t>((k * n + i) * n + j)];
    }
    double operator()(int k, int i, int j) const {
        return a[static_cast<size_t>((k * n + i) * n + j)];
    }
};

}  // namespace conelab
