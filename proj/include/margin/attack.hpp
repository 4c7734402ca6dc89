#pragma once

// The core attack: alternating restoration and projection moves that walk an
// input to the nearest point (in the chosen norm) on the model's decision
// boundary.
//
// One move k of the main loop does two things:
//
//   restoration  z = x - alpha * c(x) / (grad_c^T s) * s,  s = steepest dir
//     - the minimum-norm Newton hop onto the linearized constraint c = 0;
//     - with a box, coordinates that would leave the box are pinned to the
//       bound and the hop re-solved over the free coordinates (see
//       restoration_step_boxed);
//     - during the opening target-scan moves the hop is tried against each
//       candidate adversarial class separately and the nearest result kept.
//
//   projection   x+ = z - beta_k * (a * grad_d + b * s_z)
//     - a step that trades constraint satisfaction against distance
//       d(z - x0); the coefficient pair (a, b) comes from one of two designs:
//         ConstraintPreserving: step tangent to the constraint surface,
//           grad_c^T (x+ - z) = 0, with b fixed to 1;
//         NormReducing: a fixed to a_const, b chosen so the step drops the
//           distance by exactly beta_k * ||grad_d||^2 to first order.
//     - beta_k follows the decaying schedule beta_base / (k + k0)^nu.
//
// The last moves skip projection entirely (restoration only), which polishes
// the iterate onto the boundary and, when a box is configured, leaves the
// final point exactly feasible.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "margin/classifier.hpp"
#include "margin/constraint.hpp"
#include "margin/errors.hpp"
#include "margin/norms.hpp"
#include "margin/rng.hpp"
#include "margin/vec.hpp"

namespace margin {

enum class AbDesign { ConstraintPreserving, NormReducing };

// Axis-aligned box, same bounds for every coordinate (e.g. pixel range [0,1]).
struct BoxBounds {
    double lo = 0.0;
    double hi = 1.0;
};

struct AttackConfig {
    NormKind norm = NormKind::L2;
    double alpha = 1.0;      // restoration step scale, 0 < alpha <= 1
    double beta_base = 1.0;  // beta_k = beta_base / (k + k0)^nu, clamped to [0, 1]
    double nu = 0.5;
    int k0 = 1;
    AbDesign ab_design = AbDesign::ConstraintPreserving;
    double a_const = 0.1;    // fixed distance coefficient for NormReducing
    double init_range = 0.05; // u: start at x0 + U[-u, u]^n (u = 0: start at x0)
    double epsilon = -0.01;  // constraint offset; slightly negative lands past the boundary
    int total_moves = 200;
    int target_scan_moves = 10;   // opening moves that scan adversarial classes
    int final_tuning_start = 180; // moves >= this are restoration-only
    std::optional<BoxBounds> box;
    int restarts = 1;
    std::uint64_t seed = 0;

    static AttackConfig l2_defaults() { return {}; }

    static AttackConfig linf_defaults() {
        AttackConfig c;
        c.norm = NormKind::Linf;
        c.alpha = 0.2;
        c.nu = 1.0;
        c.ab_design = AbDesign::NormReducing;
        c.a_const = 0.1;
        return c;
    }
};

enum class Phase { Restoration, Projection, FinalTuning };

inline const char* phase_name(Phase p) {
    switch (p) {
        case Phase::Restoration: return "restoration";
        case Phase::Projection: return "projection";
        default: return "final_tuning";
    }
}

// Bit flags on MoveRecord marking the rare degenerate branches a move can take.
enum MoveFlag : unsigned {
    kFlagBoxInfeasible = 1u,      // boxed restoration ran out of free coordinates
    kFlagAbFallback = 2u,         // (a, b) denominator degenerate; fallback pair used
    kFlagNegativeA = 4u,          // computed distance coefficient came out negative
    kFlagProjectionSkipped = 8u,  // z coincided with x0, no projection direction
    kFlagStepClamped = 16u,       // projection step longer than the distance to x0; rescaled
};

struct MoveRecord {
    int k = 0;
    Phase phase = Phase::Restoration;
    double c_value = 0.0;  // constraint at the recorded point
    double distance = 0.0; // d(point - x0) in the attack norm
    Vec point;
    unsigned flags = 0;
    int scanned_class = -1; // adversarial class chosen by a target-scan move
    double beta = 0.0;      // effective step size actually applied (projection moves only)
};

struct AttackResult {
    Vec adversarial;
    double margin = 0.0;
    bool success = false;
    std::vector<MoveRecord> trace; // winning restart only
    int moves = 0;                 // iterations spent on the reported answer
    int restarts_used = 0;         // every initialization attempted, retries included
    Vec start_point;               // x^(0) of the winning restart
    double final_constraint = 0.0;
    bool aborted = false;          // every restart hit a degenerate gradient
};

inline double beta_schedule(int k, double beta_base, double nu, int k0) {
    if (k < 0) throw InvalidInput("beta_schedule: negative move index");
    if (!(beta_base > 0.0)) throw InvalidInput("beta_schedule: beta_base must be positive");
    if (!(nu >= 0.0)) throw InvalidInput("beta_schedule: nu must be non-negative");
    if (k0 < 1) throw InvalidInput("beta_schedule: k0 must be at least 1");
    double beta = beta_base / std::pow(static_cast<double>(k + k0), nu);
    if (beta > 1.0) beta = 1.0;
    return beta;
}

// Start point x0 + U[-u, u]^n, clamped into the box when one is given.
// u == 0 returns x0 exactly and draws nothing from the generator.
inline Vec initialize(const Vec& x0, double u, Rng& rng, const std::optional<BoxBounds>& box = {}) {
    if (!(u >= 0.0)) throw InvalidInput("initialize: init range must be non-negative");
    if (!all_finite(x0)) throw InvalidInput("initialize: non-finite start");
    Vec x = x0;
    if (u > 0.0)
        for (double& v : x) v += rng.uniform(-u, u);
    if (box) x = clamp_box(std::move(x), box->lo, box->hi);
    return x;
}

inline Vec initialize(const Vec& x0, double u, std::uint64_t seed,
                      const std::optional<BoxBounds>& box = {}) {
    Rng rng(seed);
    return initialize(x0, u, rng, box);
}

// ---- restoration ----------------------------------------------------------

// Newton hop onto the linearization of c at x: the minimum-norm z with
// grad^T (z - x) = -alpha * c. Exact fixed point: c == 0 returns x unchanged.
inline Vec restoration_step(const Vec& x, double c, const Vec& grad, double alpha, NormKind norm) {
    if (c == 0.0) return x;
    DualDirection s = steepest_direction(grad, norm);
    double denom = dot(grad, s.s); // dual norm of grad, > 0
    Vec z = x;
    axpy(-alpha * c / denom, s.s, z);
    return z;
}

inline Vec restoration_move(const Classifier& model, const Vec& x, const AttackObjective& obj,
                            double alpha, NormKind norm) {
    return restoration_step(x, constraint_value(model, x, obj),
                            constraint_gradient(model, x, obj), alpha, norm);
}

struct RestorationOutcome {
    Vec z;
    bool box_infeasible = false;
};

// Box-constrained hop. Solve the unconstrained hop over the free coordinates;
// pin any coordinate that lands outside the box to the violated bound; fold
// the pinned displacement into the right-hand side and re-solve. The pinned
// set only grows, so this terminates in at most n rounds. If every coordinate
// gets pinned (or the free coordinates carry no gradient mass) the
// linearization cannot reach the constraint inside the box and the outcome is
// flagged box-infeasible, with the fully clamped point as the best effort.
inline RestorationOutcome restoration_step_boxed(const Vec& x, double c, const Vec& grad,
                                                 double alpha, NormKind norm, BoxBounds box) {
    if (!(box.lo < box.hi)) throw InvalidInput("restoration_step_boxed: empty box");
    if (c == 0.0) return {x, false};
    DualDirection s = steepest_direction(grad, norm);
    std::size_t n = x.size();
    std::vector<char> pinned(n, 0);
    Vec pin_value(n, 0.0);
    for (;;) {
        double denom = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (!pinned[i]) denom += grad[i] * s.s[i];
        if (denom <= 0.0) {
            // no usable free mass: clamp everything and give up
            Vec z = x;
            for (std::size_t i = 0; i < n; ++i)
                if (pinned[i]) z[i] = pin_value[i];
            return {clamp_box(std::move(z), box.lo, box.hi), true};
        }
        double numer = alpha * c;
        for (std::size_t i = 0; i < n; ++i)
            if (pinned[i]) numer += grad[i] * (pin_value[i] - x[i]);
        double lambda = numer / denom;
        Vec z(n);
        bool clipped_any = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (pinned[i]) {
                z[i] = pin_value[i];
                continue;
            }
            z[i] = x[i] - lambda * s.s[i];
            if (z[i] < box.lo || z[i] > box.hi) {
                pinned[i] = 1;
                pin_value[i] = z[i] < box.lo ? box.lo : box.hi;
                clipped_any = true;
            }
        }
        if (!clipped_any) return {std::move(z), false};
    }
}

inline RestorationOutcome restoration_move_boxed(const Classifier& model, const Vec& x,
                                                 const AttackObjective& obj, double alpha,
                                                 NormKind norm, BoxBounds box) {
    return restoration_step_boxed(x, constraint_value(model, x, obj),
                                  constraint_gradient(model, x, obj), alpha, norm, box);
}

// ---- projection -----------------------------------------------------------

inline Vec projection_move(const Vec& z, const Vec& x0, double beta, double a, double b,
                           const DualDirection& s_z, const Vec& grad_d) {
    if (!(beta >= 0.0 && beta <= 1.0) || !std::isfinite(beta))
        throw InvalidInput("projection_move: beta outside [0, 1]");
    if (!std::isfinite(a) || !std::isfinite(b))
        throw InvalidInput("projection_move: non-finite coefficients");
    check_same_size(z, x0, "projection_move");
    Vec x = z;
    axpy(-beta * a, grad_d, x);
    axpy(-beta * b, s_z.s, x);
    return x;
}

struct AbCoefficients {
    double a = 0.0;
    double b = 0.0;
    bool fallback = false;
};

// ConstraintPreserving: fix b = 1 and choose a so the projection step is
// tangent to the constraint surface: grad_c^T (a grad_d + s) = 0, hence
// a = -(grad_c^T s) / (grad_c^T grad_d). When grad_c and grad_d are (nearly)
// orthogonal no finite a can do it; fall back to the pure distance step
// (a, b) = (1, 0), which is trivially tangent.
inline AbCoefficients ab_constraint_preserving(const Vec& grad_c_z, const Vec& grad_d,
                                               const DualDirection& s_z) {
    double den = dot(grad_c_z, s_z.s); // dual norm of grad_c, > 0 for a real gradient
    if (!(den > 0.0))
        throw DegenerateGradient("ab_constraint_preserving: constraint gradient has zero dual norm");
    double num = dot(grad_c_z, grad_d);
    double scale = l2_norm(grad_c_z) * l2_norm(grad_d);
    if (std::fabs(num) <= 1e-12 * scale) return {1.0, 0.0, true};
    return {-den / num, 1.0, false};
}

// NormReducing: fix a = a_const and choose b so the step reduces the distance
// by exactly beta * ||grad_d||^2 to first order:
// grad_d^T (a grad_d + b s) = ||grad_d||^2, hence
// b = (1 - a) ||grad_d||^2 / (grad_d^T s). When s carries no component along
// grad_d, (a, b) = (1, 0) keeps that identity exactly.
inline AbCoefficients ab_norm_reducing(const Vec& grad_d, const DualDirection& s_z,
                                       double a_const) {
    if (!std::isfinite(a_const)) throw InvalidInput("ab_norm_reducing: non-finite a");
    double dd = dot(grad_d, grad_d);
    if (!(dd > 0.0))
        throw DegenerateInput("ab_norm_reducing: zero distance gradient");
    double ds = dot(grad_d, s_z.s);
    if (std::fabs(ds) <= 1e-12 * std::sqrt(dd) * l2_norm(s_z.s)) return {1.0, 0.0, true};
    return {a_const, (1.0 - a_const) * dd / ds, false};
}

// ---- target scan ----------------------------------------------------------

struct ScanOutcome {
    Vec z;
    int chosen_class = -1;
    bool box_infeasible = false;
};

// Try a pairwise restoration hop toward each candidate adversarial class and
// keep the hop that lands nearest to x0. Candidates whose pairwise gradient
// vanishes are skipped; if that removes every candidate the scan is
// degenerate. Ties go to the smallest class index.
inline ScanOutcome target_scan_restoration(const Classifier& model, const Vec& x, int true_label,
                                           const std::vector<int>& candidates, double alpha,
                                           NormKind norm, const std::optional<BoxBounds>& box,
                                           const Vec& x0, double epsilon) {
    if (candidates.empty()) throw InvalidInput("target_scan_restoration: no candidate classes");
    ScanOutcome best;
    double best_dist = 0.0;
    bool found = false;
    for (int cls : candidates) {
        auto [ci, gi] = pairwise_constraint(model, x, true_label, cls, epsilon);
        if (l2_norm(gi) == 0.0 && ci != 0.0) continue; // no direction toward this class
        Vec z;
        bool infeasible = false;
        if (box) {
            RestorationOutcome out = restoration_step_boxed(x, ci, gi, alpha, norm, *box);
            z = std::move(out.z);
            infeasible = out.box_infeasible;
        } else {
            z = restoration_step(x, ci, gi, alpha, norm);
        }
        double dist = norm_value(sub(z, x0), norm);
        if (!found || dist < best_dist) {
            best = {std::move(z), cls, infeasible};
            best_dist = dist;
            found = true;
        }
    }
    if (!found)
        throw DegenerateGradient("target_scan_restoration: every candidate gradient vanished");
    return best;
}

// Candidate classes for the opening scan: the fixed target when the attack is
// targeted; otherwise every other class, or the 9 with the highest logits at
// x when the model has more than 10 classes.
inline std::vector<int> scan_candidates(const Classifier& model, const Vec& x,
                                        const AttackObjective& obj) {
    if (obj.target) return {*obj.target};
    int C = model.num_classes();
    int t = obj.true_label;
    std::vector<int> all;
    for (int i = 0; i < C; ++i)
        if (i != t) all.push_back(i);
    if (C <= 10) return all;
    Vec l = model.logits(x);
    std::stable_sort(all.begin(), all.end(), [&](int a, int b) { return l[a] > l[b]; });
    all.resize(9);
    std::sort(all.begin(), all.end());
    return all;
}

// ---- the full attack ------------------------------------------------------

namespace detail {

struct RunOutput {
    std::vector<MoveRecord> trace;
    Vec final_point;
};

// One restart: the full move loop from a given start point. Throws
// DegenerateGradient if any move loses its descent direction.
inline RunOutput attack_run(const Classifier& model, const Vec& x0, const AttackObjective& obj,
                            const AttackConfig& cfg, const Vec& x_init) {
    RunOutput out;
    Vec x = x_init;
    for (int k = 0; k < cfg.total_moves; ++k) {
        bool tuning = k >= cfg.final_tuning_start;

        Vec z;
        unsigned flags = 0;
        int scanned = -1;
        if (k < cfg.target_scan_moves) {
            ScanOutcome scan = target_scan_restoration(model, x, obj.true_label,
                                                       scan_candidates(model, x, obj), cfg.alpha,
                                                       cfg.norm, cfg.box, x0, obj.epsilon);
            z = std::move(scan.z);
            scanned = scan.chosen_class;
            if (scan.box_infeasible) flags |= kFlagBoxInfeasible;
        } else if (cfg.box) {
            RestorationOutcome res = restoration_move_boxed(model, x, obj, cfg.alpha, cfg.norm,
                                                            *cfg.box);
            z = std::move(res.z);
            if (res.box_infeasible) flags |= kFlagBoxInfeasible;
        } else {
            z = restoration_move(model, x, obj, cfg.alpha, cfg.norm);
        }
        double c_z = constraint_value(model, z, obj);
        out.trace.push_back({k, tuning ? Phase::FinalTuning : Phase::Restoration, c_z,
                             norm_value(sub(z, x0), cfg.norm), z, flags, scanned});

        if (tuning) {
            x = std::move(z);
            continue;
        }

        Vec diff = sub(z, x0);
        double dist = norm_value(diff, cfg.norm);
        if (dist == 0.0) {
            // z landed exactly on x0; there is no distance direction to trade
            out.trace.push_back({k, Phase::Projection, c_z, 0.0, z, kFlagProjectionSkipped, -1});
            x = std::move(z);
            continue;
        }
        Vec g_z = constraint_gradient(model, z, obj);
        DualDirection s_z = steepest_direction(g_z, cfg.norm);
        Vec grad_d = norm_subgradient(diff, cfg.norm);
        AbCoefficients ab = cfg.ab_design == AbDesign::ConstraintPreserving
                                ? ab_constraint_preserving(g_z, grad_d, s_z)
                                : ab_norm_reducing(grad_d, s_z, cfg.a_const);
        unsigned pflags = 0;
        if (ab.fallback) pflags |= kFlagAbFallback;
        if (ab.a < 0.0) pflags |= kFlagNegativeA;
        double beta = beta_schedule(k, cfg.beta_base, cfg.nu, cfg.k0);
        // Trust region: the coefficients are unbounded when grad_c and grad_d
        // are nearly orthogonal, which would fling the iterate arbitrarily
        // far. A useful projection step never needs to move further than the
        // whole distance back to x0, so shrink the effective step size until
        // it fits. Both the tangency relation and the norm-reduction identity
        // survive the rescale once stated with the effective step size, which
        // the move record keeps for replay.
        double beta_eff = beta;
        {
            Vec step = scaled(grad_d, beta * ab.a);
            axpy(beta * ab.b, s_z.s, step);
            double step_len = norm_value(step, cfg.norm);
            if (step_len > dist) {
                beta_eff = beta * (dist / step_len);
                pflags |= kFlagStepClamped;
            }
        }
        x = projection_move(z, x0, beta_eff, ab.a, ab.b, s_z, grad_d);
        out.trace.push_back({k, Phase::Projection, constraint_value(model, x, obj),
                             norm_value(sub(x, x0), cfg.norm), x, pflags, -1, beta_eff});
    }
    out.final_point = std::move(x);
    return out;
}

inline void validate_attack_config(const Classifier& model, const Vec& x0,
                                   const AttackObjective& obj, const AttackConfig& cfg) {
    check_objective(model, obj);
    if (static_cast<int>(x0.size()) != model.input_dim())
        throw InvalidInput("margin_attack: input dimension mismatch");
    if (!all_finite(x0)) throw InvalidInput("margin_attack: non-finite start point");
    if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0))
        throw ConfigError("margin_attack: alpha must be in (0, 1]");
    if (!(cfg.beta_base > 0.0)) throw ConfigError("margin_attack: beta_base must be positive");
    if (!(cfg.nu >= 0.0)) throw ConfigError("margin_attack: nu must be non-negative");
    if (cfg.k0 < 1) throw ConfigError("margin_attack: k0 must be at least 1");
    if (!std::isfinite(cfg.a_const)) throw ConfigError("margin_attack: non-finite a_const");
    if (!(cfg.init_range >= 0.0)) throw ConfigError("margin_attack: negative init range");
    if (!std::isfinite(cfg.epsilon)) throw ConfigError("margin_attack: non-finite epsilon");
    if (cfg.total_moves < 1) throw ConfigError("margin_attack: need at least one move");
    if (cfg.target_scan_moves < 0 || cfg.target_scan_moves > cfg.final_tuning_start ||
        cfg.final_tuning_start > cfg.total_moves)
        throw ConfigError("margin_attack: need 0 <= scan moves <= tuning start <= total moves");
    if (cfg.restarts < 1) throw ConfigError("margin_attack: need at least one restart");
    if (cfg.box) {
        if (!(cfg.box->lo < cfg.box->hi)) throw ConfigError("margin_attack: empty box");
        for (double v : x0)
            if (v < cfg.box->lo || v > cfg.box->hi)
                throw InvalidInput("margin_attack: start point outside box");
        if (cfg.final_tuning_start >= cfg.total_moves)
            throw ConfigError(
                "margin_attack: a box requires at least one final-tuning move so the result is feasible");
    }
}

} // namespace detail

// Run the attack from `restarts` jittered starts and report the best result:
// the smallest successful margin, or if no restart succeeds, the final point
// closest to the constraint surface. A restart whose gradient degenerates is
// retried with fresh jitter up to 3 times (pointless when init_range == 0, so
// then it simply fails); if every attempt aborts, the result is flagged
// `aborted` and returns x0 untouched.
//
// The constraint offset is cfg.epsilon; the objective's own epsilon field is
// ignored here so one configuration struct fully determines the run.
inline AttackResult margin_attack(const Classifier& model, const Vec& x0,
                                  const AttackObjective& objective, const AttackConfig& cfg) {
    detail::validate_attack_config(model, x0, objective, cfg);
    AttackObjective obj = objective;
    obj.epsilon = cfg.epsilon;

    int t = obj.true_label;
    bool have_best = false;
    AttackResult best;
    best.aborted = true;
    int attempts_total = 0;

    for (int r = 0; r < cfg.restarts; ++r) {
        int max_attempts = cfg.init_range > 0.0 ? 4 : 1;
        for (int attempt = 0; attempt < max_attempts; ++attempt) {
            ++attempts_total;
            Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(r) * 8 + attempt));
            Vec x_init = initialize(x0, cfg.init_range, rng, cfg.box);
            detail::RunOutput run;
            try {
                run = detail::attack_run(model, x0, obj, cfg, x_init);
            } catch (const DegenerateGradient&) {
                continue; // retry with fresh jitter (or give up when u == 0)
            }
            int top = argmax_index(model.logits(run.final_point));
            bool success = obj.target ? top == *obj.target : top != t;
            double margin = norm_value(sub(run.final_point, x0), cfg.norm);
            double final_c = constraint_value(model, run.final_point, obj);

            bool better;
            if (!have_best) {
                better = true;
            } else if (success != best.success) {
                better = success;
            } else if (success) {
                better = margin < best.margin;
            } else {
                better = std::fabs(final_c) < std::fabs(best.final_constraint);
            }
            if (better) {
                best.adversarial = run.final_point;
                best.margin = margin;
                best.success = success;
                best.trace = std::move(run.trace);
                best.moves = cfg.total_moves;
                best.start_point = x_init;
                best.final_constraint = final_c;
                best.aborted = false;
                have_best = true;
            }
            break; // this restart produced a result; no retry needed
        }
    }
    best.restarts_used = attempts_total;
    if (!have_best) {
        best.adversarial = x0;
        best.start_point = x0;
        best.margin = 0.0;
        best.success = false;
        best.final_constraint = constraint_value(model, x0, obj);
        best.aborted = true;
    }
    return best;
}

} // namespace margin
