#pragma once

// Reference attacks the core attack is benchmarked against, plus the
// exhaustive 2-D oracle that gives ground-truth margins for plane models.
// All of them reuse the same constraint c(x) (including its epsilon offset),
// so success means the same thing everywhere.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "margin/attack.hpp"
#include "margin/classifier.hpp"
#include "margin/constraint.hpp"
#include "margin/errors.hpp"
#include "margin/norms.hpp"
#include "margin/rng.hpp"
#include "margin/vec.hpp"

namespace margin {

struct DeepfoolConfig {
    int max_iters = 100;
    double overshoot = 0.02; // final perturbation scaled by (1 + overshoot)
};

struct FgsmConfig {
    double grid_min = 1e-4; // step grid is geometric from grid_min to grid_max
    double grid_max = 1.0;
    int grid_count = 64;
};

struct PgdConfig {
    double eps = 0.1;  // linf ball radius
    double step = 0.01;
    int iters = 100;
    int restarts = 5;
    std::uint64_t seed = 0;
};

struct CwConfig {
    double confidence = 0.0;
    double learning_rate = 0.01;
    int opt_steps = 300;
    int binary_steps = 5;      // geometric search over the penalty weight
    double lambda_lo = 1e-3;   // first probe runs at this weight
    double lambda_hi = 1e6;
};

struct BaselineConfig {
    DeepfoolConfig deepfool;
    FgsmConfig fgsm;
    PgdConfig pgd;
    CwConfig cw;
};

namespace detail {
inline bool classified_adversarial(const Classifier& model, const Vec& x,
                                   const AttackObjective& obj) {
    int top = argmax_index(model.logits(x));
    return obj.target ? top == *obj.target : top != obj.true_label;
}
} // namespace detail

// DeepFool-style iteration: at each step linearize the pairwise constraint
// against every other class, take the cheapest l2 hop across the nearest
// linearized boundary, and finish by scaling the accumulated perturbation by
// (1 + overshoot). l2 margins.
inline AttackResult deepfool(const Classifier& model, const Vec& x0, const AttackObjective& obj,
                             const DeepfoolConfig& cfg = {}) {
    check_objective(model, obj);
    if (cfg.max_iters < 1) throw ConfigError("deepfool: need at least one iteration");
    int t = obj.true_label;
    AttackResult res;
    res.start_point = x0;
    Vec x = x0;
    int used = 0;
    for (int it = 0; it < cfg.max_iters; ++it) {
        if (constraint_value(model, x, obj) <= 0.0) break;
        double best_len = 0.0;
        double best_v = 0.0;
        Vec best_w;
        bool found = false;
        if (obj.target) {
            auto [v, w] = pairwise_constraint(model, x, t, *obj.target, obj.epsilon);
            double nw = l2_norm(w);
            if (nw > 0.0) {
                best_len = std::fabs(v) / nw;
                best_v = v;
                best_w = std::move(w);
                found = true;
            }
        } else {
            for (int i = 0; i < model.num_classes(); ++i) {
                if (i == t) continue;
                auto [v, w] = pairwise_constraint(model, x, t, i, obj.epsilon);
                double nw = l2_norm(w);
                if (nw == 0.0) continue;
                double len = std::fabs(v) / nw;
                if (!found || len < best_len) {
                    best_len = len;
                    best_v = v;
                    best_w = std::move(w);
                    found = true;
                }
            }
        }
        if (!found) {
            res.aborted = true;
            break;
        }
        // hop across the chosen linearized boundary
        double nw2 = dot(best_w, best_w);
        axpy(-best_v / nw2, best_w, x);
        ++used;
    }
    Vec pert = sub(x, x0);
    res.adversarial = x0;
    axpy(1.0 + cfg.overshoot, pert, res.adversarial);
    res.margin = l2_norm(sub(res.adversarial, x0));
    res.success = detail::classified_adversarial(model, res.adversarial, obj);
    res.moves = used;
    res.final_constraint = constraint_value(model, res.adversarial, obj);
    res.restarts_used = 1;
    return res;
}

// Single-gradient sign attack with a step-size line search: walk the
// geometric grid of step sizes from small to large and stop at the first one
// whose perturbed point is adversarial. linf margins.
inline AttackResult fgsm_step_search(const Classifier& model, const Vec& x0,
                                     const AttackObjective& obj, const FgsmConfig& cfg = {},
                                     std::optional<BoxBounds> box = {}) {
    check_objective(model, obj);
    if (cfg.grid_count < 1) throw ConfigError("fgsm: need at least one grid step");
    if (!(cfg.grid_min > 0.0) || !(cfg.grid_max >= cfg.grid_min))
        throw ConfigError("fgsm: need 0 < grid_min <= grid_max");
    AttackResult res;
    res.start_point = x0;
    res.restarts_used = 1;
    Vec g = constraint_gradient(model, x0, obj);
    if (l2_norm(g) == 0.0) {
        res.adversarial = x0;
        res.margin = 0.0;
        res.success = detail::classified_adversarial(model, x0, obj);
        res.final_constraint = constraint_value(model, x0, obj);
        res.aborted = true;
        return res;
    }
    Vec sgn = steepest_direction(g, NormKind::Linf).s;
    Vec last = x0;
    for (int j = 0; j < cfg.grid_count; ++j) {
        double eta = cfg.grid_count == 1
                         ? cfg.grid_min
                         : cfg.grid_min * std::pow(cfg.grid_max / cfg.grid_min,
                                                   static_cast<double>(j) / (cfg.grid_count - 1));
        Vec x = x0;
        axpy(-eta, sgn, x);
        if (box) x = clamp_box(std::move(x), box->lo, box->hi);
        last = x;
        res.moves = j + 1;
        if (detail::classified_adversarial(model, x, obj)) {
            res.adversarial = std::move(x);
            res.margin = linf_norm(sub(res.adversarial, x0));
            res.success = true;
            res.final_constraint = constraint_value(model, res.adversarial, obj);
            return res;
        }
    }
    res.adversarial = std::move(last);
    res.margin = linf_norm(sub(res.adversarial, x0));
    res.success = false;
    res.final_constraint = constraint_value(model, res.adversarial, obj);
    return res;
}

// Projected gradient descent on c inside the linf ball of radius eps around
// x0 (intersected with the box when given): signed steps, clamped back each
// iteration, random start per restart. Keeps the smallest-margin adversarial
// iterate seen across restarts. linf margins.
inline AttackResult pgd(const Classifier& model, const Vec& x0, const AttackObjective& obj,
                        const PgdConfig& cfg = {}, std::optional<BoxBounds> box = {}) {
    check_objective(model, obj);
    if (!(cfg.eps >= 0.0)) throw ConfigError("pgd: negative ball radius");
    if (!(cfg.step > 0.0)) throw ConfigError("pgd: step must be positive");
    if (cfg.iters < 1) throw ConfigError("pgd: need at least one iteration");
    if (cfg.restarts < 1) throw ConfigError("pgd: need at least one restart");
    if (box)
        for (double v : x0)
            if (v < box->lo || v > box->hi) throw InvalidInput("pgd: start point outside box");

    auto clamp_ball = [&](Vec x) {
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = std::clamp(x[i], x0[i] - cfg.eps, x0[i] + cfg.eps);
        if (box) x = clamp_box(std::move(x), box->lo, box->hi);
        return x;
    };

    AttackResult res;
    res.start_point = x0;
    bool have_fail = false;
    double fail_c = 0.0;
    int total_iters = 0;
    for (int r = 0; r < cfg.restarts; ++r) {
        Rng rng(derive_seed(cfg.seed, r));
        Vec x = x0;
        if (cfg.eps > 0.0)
            for (double& v : x) v += rng.uniform(-cfg.eps, cfg.eps);
        x = clamp_ball(std::move(x));
        for (int it = 0; it <= cfg.iters; ++it) {
            if (detail::classified_adversarial(model, x, obj)) {
                double margin = linf_norm(sub(x, x0));
                if (!res.success || margin < res.margin) {
                    res.adversarial = x;
                    res.margin = margin;
                    res.success = true;
                    res.final_constraint = constraint_value(model, x, obj);
                }
                break;
            }
            if (it == cfg.iters) break;
            Vec g = constraint_gradient(model, x, obj);
            if (l2_norm(g) == 0.0) break; // stuck on a plateau; next restart
            axpy(-cfg.step, steepest_direction(g, NormKind::Linf).s, x);
            x = clamp_ball(std::move(x));
            ++total_iters;
        }
        if (!res.success) {
            double c_here = constraint_value(model, x, obj);
            if (!have_fail || std::fabs(c_here) < std::fabs(fail_c)) {
                res.adversarial = x;
                res.margin = linf_norm(sub(x, x0));
                res.final_constraint = c_here;
                fail_c = c_here;
                have_fail = true;
            }
        }
    }
    res.moves = total_iters;
    res.restarts_used = cfg.restarts;
    return res;
}

// Penalty-method l2 attack: minimize ||x - x0||^2 + lambda * max(c(x) + kappa, 0)
// with Adam, geometrically searching the penalty weight lambda between
// lambda_lo and lambda_hi (first probe at lambda_lo; success shrinks the
// bracket from above, failure from below). When a box is given the iterate is
// reparameterized through tanh so it can never leave the box. Keeps the best
// (smallest l2) adversarial point seen anywhere in the search.
inline AttackResult cw_l2(const Classifier& model, const Vec& x0, const AttackObjective& obj,
                          const CwConfig& cfg = {}, std::optional<BoxBounds> box = {}) {
    check_objective(model, obj);
    if (cfg.opt_steps < 1) throw ConfigError("cw_l2: need at least one optimizer step");
    if (cfg.binary_steps < 1) throw ConfigError("cw_l2: need at least one penalty search step");
    if (!(cfg.learning_rate > 0.0)) throw ConfigError("cw_l2: learning rate must be positive");
    if (!(cfg.lambda_lo > 0.0 && cfg.lambda_hi >= cfg.lambda_lo))
        throw ConfigError("cw_l2: need 0 < lambda_lo <= lambda_hi");
    if (box) {
        if (!(box->lo < box->hi)) throw InvalidInput("cw_l2: empty box");
        for (double v : x0)
            if (v < box->lo || v > box->hi) throw InvalidInput("cw_l2: start point outside box");
    }

    double mid = box ? 0.5 * (box->lo + box->hi) : 0.0;
    double half = box ? 0.5 * (box->hi - box->lo) : 1.0;
    std::size_t n = x0.size();

    auto to_x = [&](const Vec& w) {
        if (!box) return w;
        Vec x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = mid + half * std::tanh(w[i]);
        return x;
    };
    Vec w0(n);
    if (box) {
        for (std::size_t i = 0; i < n; ++i) {
            double r = std::clamp((x0[i] - mid) / half, -1.0 + 1e-9, 1.0 - 1e-9);
            w0[i] = std::atanh(r);
        }
    } else {
        w0 = x0;
    }

    AttackResult res;
    res.start_point = x0;
    res.restarts_used = 1;
    double lo = cfg.lambda_lo, hi = cfg.lambda_hi;
    double lambda = cfg.lambda_lo;
    int steps_total = 0;
    for (int bs = 0; bs < cfg.binary_steps; ++bs) {
        Vec w = w0, m(n, 0.0), v(n, 0.0);
        bool success_here = false;
        for (int it = 1; it <= cfg.opt_steps; ++it) {
            Vec x = to_x(w);
            double c = constraint_value(model, x, obj);
            Vec grad_x = sub(x, x0);
            for (double& gi : grad_x) gi *= 2.0;
            if (c + cfg.confidence > 0.0)
                axpy(lambda, constraint_gradient(model, x, obj), grad_x);
            Vec grad_w = std::move(grad_x);
            if (box)
                for (std::size_t i = 0; i < n; ++i) {
                    double th = std::tanh(w[i]);
                    grad_w[i] *= half * (1.0 - th * th);
                }
            // Adam with bias correction
            double b1t = 1.0 - std::pow(0.9, it);
            double b2t = 1.0 - std::pow(0.999, it);
            for (std::size_t i = 0; i < n; ++i) {
                m[i] = 0.9 * m[i] + 0.1 * grad_w[i];
                v[i] = 0.999 * v[i] + 0.001 * grad_w[i] * grad_w[i];
                w[i] -= cfg.learning_rate * (m[i] / b1t) / (std::sqrt(v[i] / b2t) + 1e-8);
            }
            ++steps_total;
            Vec x_new = to_x(w);
            if (detail::classified_adversarial(model, x_new, obj)) {
                success_here = true;
                double margin = l2_norm(sub(x_new, x0));
                if (!res.success || margin < res.margin) {
                    res.adversarial = x_new;
                    res.margin = margin;
                    res.success = true;
                    res.final_constraint = constraint_value(model, x_new, obj);
                }
            }
        }
        if (success_here)
            hi = lambda;
        else
            lo = lambda;
        if (hi / lo < 1.0 + 1e-9) break; // bracket collapsed
        lambda = std::sqrt(lo * hi);
    }
    res.moves = steps_total;
    if (!res.success) {
        res.adversarial = x0;
        res.margin = 0.0;
        res.final_constraint = constraint_value(model, x0, obj);
    }
    return res;
}

// Exhaustive ground-truth margin for 2-D models: march a fan of rays out of
// x0 until the constraint changes sign, bisect each crossing down to
// bisection_tol, and return the smallest distance found in the requested
// norm. Rays that can no longer beat the best crossing are cut short. Throws
// NoBoundaryFound when no ray crosses within max_radius. Returns 0 when x0
// itself already satisfies the constraint.
inline double brute_force_margin_2d(const Classifier& model, const Vec& x0,
                                    const AttackObjective& obj, NormKind kind,
                                    int angular_resolution = 3600, double bisection_tol = 1e-5,
                                    double max_radius = 8.0) {
    check_objective(model, obj);
    if (model.input_dim() != 2)
        throw InvalidInput("brute_force_margin_2d: model is not 2-dimensional");
    if (x0.size() != 2) throw InvalidInput("brute_force_margin_2d: point is not 2-dimensional");
    if (angular_resolution < 4) throw InvalidInput("brute_force_margin_2d: too few rays");
    if (!(bisection_tol > 0.0)) throw InvalidInput("brute_force_margin_2d: tolerance must be positive");
    if (!(max_radius > 0.0)) throw InvalidInput("brute_force_margin_2d: radius must be positive");

    if (constraint_value(model, x0, obj) <= 0.0) return 0.0;

    const double pi = 3.14159265358979323846;
    const double coarse = max_radius / 512.0;
    double best = std::numeric_limits<double>::infinity();
    Vec probe(2);
    auto c_at = [&](double dx, double dy) {
        probe[0] = x0[0] + dx;
        probe[1] = x0[1] + dy;
        return constraint_value(model, probe, obj);
    };
    for (int j = 0; j < angular_resolution; ++j) {
        double theta = 2.0 * pi * j / angular_resolution;
        double cx = std::cos(theta), cy = std::sin(theta);
        // distance per unit of ray length in the requested norm
        double per_unit = kind == NormKind::L2 ? 1.0 : std::max(std::fabs(cx), std::fabs(cy));
        if (per_unit == 0.0) continue;
        // marching beyond this cannot improve on the best crossing so far
        double reach = std::min(max_radius, best / per_unit + coarse);
        double t_prev = 0.0;
        for (double t = coarse; t_prev < reach; t += coarse) {
            if (t > reach) t = reach;
            if (c_at(t * cx, t * cy) <= 0.0) {
                // bracket [t_prev, t]; bisect on the sign change
                double lo = t_prev, hi = t;
                while (hi - lo > bisection_tol) {
                    double mid = 0.5 * (lo + hi);
                    if (c_at(mid * cx, mid * cy) <= 0.0)
                        hi = mid;
                    else
                        lo = mid;
                }
                best = std::min(best, hi * per_unit);
                break;
            }
            t_prev = t;
            if (t >= reach) break;
        }
    }
    if (!std::isfinite(best)) throw NoBoundaryFound("brute_force_margin_2d: no crossing within radius");
    return best;
}

} // namespace margin
