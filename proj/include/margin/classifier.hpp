#pragma once

// Victim models as logit-plus-gradient oracles.
//
// A Classifier exposes raw (pre-softmax) logits and the exact gradient of any
// single logit. All models are deterministic and immutable after
// construction; attacks only ever query them, never mutate them.

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "margin/errors.hpp"
#include "margin/vec.hpp"

namespace margin {

class Classifier {
public:
    virtual ~Classifier() = default;

    virtual int input_dim() const = 0;
    virtual int num_classes() const = 0;

    // Raw logits at x; size num_classes().
    virtual Vec logits(const Vec& x) const = 0;

    // Exact gradient of logit i at x; size input_dim(). At non-smooth points
    // the convention is fixed per model and deterministic.
    virtual Vec logit_gradient(const Vec& x, int i) const = 0;

protected:
    void check_input(const Vec& x) const {
        if (static_cast<int>(x.size()) != input_dim())
            throw InvalidInput("classifier: input dimension mismatch");
        if (!all_finite(x))
            throw InvalidInput("classifier: non-finite input");
    }
    void check_class(int i) const {
        if (i < 0 || i >= num_classes())
            throw InvalidInput("classifier: class index out of range");
    }
};

// logits(x) = W x + b. The one model whose attack optimum has a closed form,
// which makes it the canonical exactness fixture.
class AffineClassifier : public Classifier {
public:
    AffineClassifier(Matrix w, Vec b) : w_(std::move(w)), b_(std::move(b)) {
        if (w_.rows != static_cast<int>(b_.size()))
            throw InvalidInput("AffineClassifier: W rows must match b size");
        if (w_.rows < 1 || w_.cols < 1)
            throw InvalidInput("AffineClassifier: empty weight matrix");
    }

    int input_dim() const override { return w_.cols; }
    int num_classes() const override { return w_.rows; }

    Vec logits(const Vec& x) const override {
        check_input(x);
        Vec y = matvec(w_, x);
        for (int i = 0; i < w_.rows; ++i) y[i] += b_[i];
        return y;
    }

    Vec logit_gradient(const Vec& x, int i) const override {
        check_input(x);
        check_class(i);
        return w_.row(i);
    }

    const Matrix& weights() const { return w_; }
    const Vec& bias() const { return b_; }

private:
    Matrix w_;
    Vec b_;
};

// Two-class analytic models on the plane. Logit 0 is a closed-form boundary
// score, logit 1 is identically zero, so the decision boundary is exactly
// {score = 0} and the true minimum distance to it can be worked out on paper
// (or by the exhaustive 2-D oracle). Class 0 is the region score > 0.

// score(x) = x1^2 + x2^2 - r^2: class 0 outside the circle of radius r.
class CircleModel : public Classifier {
public:
    explicit CircleModel(double radius) : r_(radius) {
        if (!(radius > 0.0)) throw InvalidInput("CircleModel: radius must be positive");
    }

    int input_dim() const override { return 2; }
    int num_classes() const override { return 2; }

    Vec logits(const Vec& x) const override {
        check_input(x);
        return {x[0] * x[0] + x[1] * x[1] - r_ * r_, 0.0};
    }

    Vec logit_gradient(const Vec& x, int i) const override {
        check_input(x);
        check_class(i);
        if (i == 1) return {0.0, 0.0};
        return {2.0 * x[0], 2.0 * x[1]};
    }

    double radius() const { return r_; }

private:
    double r_;
};

// score(x) = x2 - p(x1) with p a polynomial; class 0 above the curve.
// coeffs are ascending: p(t) = c0 + c1 t + c2 t^2 + ...
class PolynomialModel : public Classifier {
public:
    explicit PolynomialModel(Vec coeffs) : c_(std::move(coeffs)) {
        if (c_.empty()) throw InvalidInput("PolynomialModel: empty coefficients");
        if (!all_finite(c_)) throw InvalidInput("PolynomialModel: non-finite coefficient");
    }

    int input_dim() const override { return 2; }
    int num_classes() const override { return 2; }

    Vec logits(const Vec& x) const override {
        check_input(x);
        return {x[1] - horner(x[0]), 0.0};
    }

    Vec logit_gradient(const Vec& x, int i) const override {
        check_input(x);
        check_class(i);
        if (i == 1) return {0.0, 0.0};
        return {-horner_derivative(x[0]), 1.0};
    }

private:
    double horner(double t) const {
        double v = 0.0;
        for (std::size_t i = c_.size(); i > 0; --i) v = v * t + c_[i - 1];
        return v;
    }
    double horner_derivative(double t) const {
        double v = 0.0;
        for (std::size_t i = c_.size(); i > 1; --i)
            v = v * t + c_[i - 1] * static_cast<double>(i - 1);
        return v;
    }

    Vec c_;
};

// score(x) = x2 - f(x1) with f continuous piecewise linear through the knots
// (xs[j], ys[j]); the end segments extend with their slopes. At a knot the
// gradient uses the right-hand segment's slope, which keeps it deterministic.
class PiecewiseLinearModel : public Classifier {
public:
    PiecewiseLinearModel(Vec knot_x, Vec knot_y) : xs_(std::move(knot_x)), ys_(std::move(knot_y)) {
        if (xs_.size() != ys_.size() || xs_.size() < 2)
            throw InvalidInput("PiecewiseLinearModel: need at least two knots");
        for (std::size_t j = 1; j < xs_.size(); ++j)
            if (!(xs_[j] > xs_[j - 1]))
                throw InvalidInput("PiecewiseLinearModel: knot x values must be strictly increasing");
        if (!all_finite(xs_) || !all_finite(ys_))
            throw InvalidInput("PiecewiseLinearModel: non-finite knot");
    }

    int input_dim() const override { return 2; }
    int num_classes() const override { return 2; }

    Vec logits(const Vec& x) const override {
        check_input(x);
        std::size_t j = segment(x[0]);
        double slope = seg_slope(j);
        return {x[1] - (ys_[j] + slope * (x[0] - xs_[j])), 0.0};
    }

    Vec logit_gradient(const Vec& x, int i) const override {
        check_input(x);
        check_class(i);
        if (i == 1) return {0.0, 0.0};
        return {-seg_slope(segment(x[0])), 1.0};
    }

private:
    // Segment index j such that t falls in [xs[j], xs[j+1]); knots resolve to
    // the segment on their right, and the end segments are half-infinite.
    std::size_t segment(double t) const {
        auto it = std::upper_bound(xs_.begin(), xs_.end(), t);
        std::ptrdiff_t j = (it - xs_.begin()) - 1;
        std::ptrdiff_t last = static_cast<std::ptrdiff_t>(xs_.size()) - 2;
        if (j < 0) j = 0;
        if (j > last) j = last;
        return static_cast<std::size_t>(j);
    }
    double seg_slope(std::size_t j) const {
        return (ys_[j + 1] - ys_[j]) / (xs_[j + 1] - xs_[j]);
    }

    Vec xs_, ys_;
};

} // namespace margin
