#pragma once

// Central-difference gradient, used as the independent check on every
// analytic and backprop gradient in the test suite.

#include "margin/classifier.hpp"
#include "margin/errors.hpp"
#include "margin/vec.hpp"

namespace margin {

inline Vec finite_diff_gradient(const Classifier& model, const Vec& x, int i, double h) {
    if (!(h > 0.0)) throw InvalidInput("finite_diff_gradient: step must be positive");
    if (static_cast<int>(x.size()) != model.input_dim())
        throw InvalidInput("finite_diff_gradient: input dimension mismatch");
    Vec g(x.size());
    Vec probe = x;
    for (std::size_t d = 0; d < x.size(); ++d) {
        probe[d] = x[d] + h;
        double up = model.logits(probe)[i];
        probe[d] = x[d] - h;
        double dn = model.logits(probe)[i];
        probe[d] = x[d];
        g[d] = (up - dn) / (2.0 * h);
    }
    return g;
}

} // namespace margin
