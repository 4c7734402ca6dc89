#pragma once

// The attack constraint c(x).
//
// Non-targeted, true label t:   c(x) = logit_t(x) - max_{i != t} logit_i(x) - eps
// Targeted toward class a != t: c(x) = max_{i != a} logit_i(x) - logit_a(x) - eps
//
// In both cases c > 0 means the attack has not yet succeeded and c <= 0 means
// it has; driving c to zero puts x on the (eps-shifted) decision boundary.
// A slightly negative eps therefore asks for a point just past the boundary.
// The max is non-smooth; the gradient uses the smallest-index runner-up on
// ties, which keeps it a deterministic member of the subdifferential.

#include <optional>
#include <utility>

#include "margin/classifier.hpp"
#include "margin/errors.hpp"
#include "margin/vec.hpp"

namespace margin {

struct AttackObjective {
    int true_label = 0;
    double epsilon = -0.01;
    std::optional<int> target; // targeted attack toward this class
};

inline void check_objective(const Classifier& model, const AttackObjective& obj) {
    if (model.num_classes() < 2)
        throw InvalidModel("attack objective: model needs at least two classes");
    if (obj.true_label < 0 || obj.true_label >= model.num_classes())
        throw InvalidInput("attack objective: true label out of range");
    if (!std::isfinite(obj.epsilon))
        throw InvalidInput("attack objective: non-finite epsilon");
    if (obj.target) {
        if (*obj.target < 0 || *obj.target >= model.num_classes())
            throw InvalidInput("attack objective: target class out of range");
        if (*obj.target == obj.true_label)
            throw InvalidInput("attack objective: target class equals true label");
    }
}

// argmax over i != excluded; the smallest index wins ties.
inline int runner_up_class(const Vec& logits, int excluded) {
    if (static_cast<int>(logits.size()) < 2)
        throw InvalidModel("runner_up_class: need at least two logits");
    int best = -1;
    for (int i = 0; i < static_cast<int>(logits.size()); ++i) {
        if (i == excluded) continue;
        if (best < 0 || logits[i] > logits[best]) best = i;
    }
    return best;
}

inline double constraint_value(const Classifier& model, const Vec& x, const AttackObjective& obj) {
    check_objective(model, obj);
    Vec l = model.logits(x);
    if (obj.target) {
        int a = *obj.target;
        return l[runner_up_class(l, a)] - l[a] - obj.epsilon;
    }
    int t = obj.true_label;
    return l[t] - l[runner_up_class(l, t)] - obj.epsilon;
}

inline Vec constraint_gradient(const Classifier& model, const Vec& x, const AttackObjective& obj) {
    check_objective(model, obj);
    Vec l = model.logits(x);
    if (obj.target) {
        int a = *obj.target;
        int r = runner_up_class(l, a);
        Vec g = model.logit_gradient(x, r);
        Vec ga = model.logit_gradient(x, a);
        for (std::size_t d = 0; d < g.size(); ++d) g[d] -= ga[d];
        return g;
    }
    int t = obj.true_label;
    int r = runner_up_class(l, t);
    Vec g = model.logit_gradient(x, t);
    Vec gr = model.logit_gradient(x, r);
    for (std::size_t d = 0; d < g.size(); ++d) g[d] -= gr[d];
    return g;
}

// Constraint restricted to one adversarial class i:
//   c_i(x) = logit_t(x) - logit_i(x) - eps
// Returns (value, gradient). Used by the target scan and by baseline attacks
// that hop between pairwise boundaries.
inline std::pair<double, Vec> pairwise_constraint(const Classifier& model, const Vec& x,
                                                  int t, int i, double epsilon) {
    if (model.num_classes() < 2)
        throw InvalidModel("pairwise_constraint: model needs at least two classes");
    if (t < 0 || t >= model.num_classes() || i < 0 || i >= model.num_classes())
        throw InvalidInput("pairwise_constraint: class index out of range");
    if (t == i) throw InvalidInput("pairwise_constraint: classes must differ");
    Vec l = model.logits(x);
    Vec g = model.logit_gradient(x, t);
    Vec gi = model.logit_gradient(x, i);
    for (std::size_t d = 0; d < g.size(); ++d) g[d] -= gi[d];
    return {l[t] - l[i] - epsilon, std::move(g)};
}

} // namespace margin
