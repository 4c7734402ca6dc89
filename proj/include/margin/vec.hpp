#pragma once

// Small dense vector and matrix helpers. Everything here is double precision
// and desk scale (dimensions in the hundreds at most), so plain loops over
// std::vector are all we need — no BLAS, no expression templates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "margin/errors.hpp"

namespace margin {

using Vec = std::vector<double>;

inline void check_same_size(const Vec& a, const Vec& b, const char* where) {
    if (a.size() != b.size())
        throw InvalidInput(std::string(where) + ": dimension mismatch");
}

inline double dot(const Vec& a, const Vec& b) {
    check_same_size(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double l2_norm(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double l1_norm(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += std::fabs(x);
    return s;
}

inline double linf_norm(const Vec& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

inline Vec add(const Vec& a, const Vec& b) {
    check_same_size(a, b, "add");
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vec sub(const Vec& a, const Vec& b) {
    check_same_size(a, b, "sub");
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec scaled(const Vec& v, double t) {
    Vec r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) r[i] = t * v[i];
    return r;
}

// y += t * x
inline void axpy(double t, const Vec& x, Vec& y) {
    check_same_size(x, y, "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += t * x[i];
}

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// Index of the largest entry; the smallest index wins ties.
inline int argmax_index(const Vec& v) {
    if (v.empty()) throw InvalidInput("argmax_index: empty vector");
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

inline Vec clamp_box(Vec v, double lo, double hi) {
    for (double& x : v) x = std::clamp(x, lo, hi);
    return v;
}

// Dense row-major matrix, just enough for affine layers.
struct Matrix {
    int rows = 0;
    int cols = 0;
    Vec data; // rows * cols, row major

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    Vec row(int r) const {
        Vec out(cols);
        for (int c = 0; c < cols; ++c) out[c] = at(r, c);
        return out;
    }
};

inline Vec matvec(const Matrix& m, const Vec& x) {
    if (static_cast<int>(x.size()) != m.cols)
        throw InvalidInput("matvec: dimension mismatch");
    Vec y(m.rows, 0.0);
    for (int r = 0; r < m.rows; ++r) {
        double s = 0.0;
        for (int c = 0; c < m.cols; ++c) s += m.at(r, c) * x[c];
        y[r] = s;
    }
    return y;
}

} // namespace margin
