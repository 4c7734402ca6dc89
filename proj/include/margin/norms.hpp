#pragma once

// lp-norm machinery: norm values, subgradients, dual-norm steepest descent
// directions, and the closed-form minimum-norm solution of a single linear
// equation. These are the primitives every move of the attack is built from.
//
// Conventions, fixed once here so every caller agrees:
//   * steepest_direction(g) returns the direction s with g^T s = dual_norm(g):
//       l2:   s = g / ||g||_2            (unit l2 length)
//       linf: s = sign(g), sign(0) = 0   (entries in {-1, 0, +1})
//   * norm_subgradient(v) returns a subgradient of the norm at v:
//       l2:   v / ||v||_2
//       linf: averaged coordinate signs over the set of maximal-magnitude
//             entries (ties within a relative tolerance), zero elsewhere.

#include <cmath>
#include <cstddef>

#include "margin/errors.hpp"
#include "margin/vec.hpp"

namespace margin {

enum class NormKind { L2, Linf };

inline const char* norm_name(NormKind kind) {
    return kind == NormKind::L2 ? "l2" : "linf";
}

inline double norm_value(const Vec& v, NormKind kind) {
    if (v.empty()) throw InvalidInput("norm_value: empty vector");
    if (!all_finite(v)) throw InvalidInput("norm_value: non-finite entry");
    return kind == NormKind::L2 ? l2_norm(v) : linf_norm(v);
}

// Dual norm of a gradient: l2 is self-dual, the dual of linf is l1.
inline double dual_norm_value(const Vec& g, NormKind kind) {
    if (g.empty()) throw InvalidInput("dual_norm_value: empty vector");
    if (!all_finite(g)) throw InvalidInput("dual_norm_value: non-finite entry");
    return kind == NormKind::L2 ? l2_norm(g) : l1_norm(g);
}

// Direction that attains the dual norm, i.e. g^T s == dual_norm_value(g).
// A wrapper type rather than a bare Vec so call sites say what they hold.
struct DualDirection {
    Vec s;
};

inline DualDirection steepest_direction(const Vec& g, NormKind kind) {
    if (g.empty()) throw InvalidInput("steepest_direction: empty gradient");
    if (!all_finite(g)) throw InvalidInput("steepest_direction: non-finite entry");
    double mag = l2_norm(g);
    if (mag == 0.0)
        throw DegenerateGradient("steepest_direction: zero gradient");
    DualDirection out;
    out.s.resize(g.size());
    if (kind == NormKind::L2) {
        for (std::size_t i = 0; i < g.size(); ++i) out.s[i] = g[i] / mag;
    } else {
        for (std::size_t i = 0; i < g.size(); ++i)
            out.s[i] = (g[i] > 0.0) ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
    }
    return out;
}

// Subgradient of the norm at v. For linf the norm is not differentiable when
// several coordinates share the maximal magnitude; we average the signed
// indicator over every coordinate within tie_tol of the maximum, which is the
// centroid of the subdifferential face and keeps the result deterministic.
inline Vec norm_subgradient(const Vec& v, NormKind kind, double tie_tol) {
    if (v.empty()) throw InvalidInput("norm_subgradient: empty vector");
    if (!all_finite(v)) throw InvalidInput("norm_subgradient: non-finite entry");
    if (!(tie_tol >= 0.0)) throw InvalidInput("norm_subgradient: negative tie tolerance");
    Vec g(v.size(), 0.0);
    if (kind == NormKind::L2) {
        double mag = l2_norm(v);
        if (mag == 0.0)
            throw DegenerateInput("norm_subgradient: zero vector has no l2 direction");
        for (std::size_t i = 0; i < v.size(); ++i) g[i] = v[i] / mag;
        return g;
    }
    double mx = linf_norm(v);
    if (mx == 0.0)
        throw DegenerateInput("norm_subgradient: zero vector has no linf direction");
    int ties = 0;
    for (double x : v)
        if (std::fabs(x) >= mx - tie_tol) ++ties;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (std::fabs(v[i]) >= mx - tie_tol)
            g[i] = (v[i] > 0.0 ? 1.0 : -1.0) / static_cast<double>(ties);
    return g;
}

inline Vec norm_subgradient(const Vec& v, NormKind kind) {
    double tol = kind == NormKind::Linf ? 1e-9 * linf_norm(v) : 0.0;
    return norm_subgradient(v, kind, tol);
}

// Minimum-norm solution of g^T x = b: x = (b / g^T s) * s with s the dual
// steepest direction. Satisfies the constraint exactly and has norm
// |b| / dual_norm(g), which is optimal by Hoelder's inequality.
inline Vec min_norm_linear_solution(const Vec& g, double b, NormKind kind) {
    if (!std::isfinite(b)) throw InvalidInput("min_norm_linear_solution: non-finite rhs");
    DualDirection dir = steepest_direction(g, kind);
    double denom = dot(g, dir.s); // == dual_norm_value(g) > 0
    if (denom <= 0.0)
        throw DegenerateGradient("min_norm_linear_solution: zero dual norm");
    return scaled(dir.s, b / denom);
}

} // namespace margin
