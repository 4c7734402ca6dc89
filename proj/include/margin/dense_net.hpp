#pragma once

// Fully-connected network with rectifier hidden units and an identity output
// layer. Forward, backward and initialization are written out by hand so that
// every floating-point operation is explicit and reproducible.
//
// Kink convention: the rectifier derivative at exactly zero is 0 (the unit is
// treated as inactive), so logit_gradient is deterministic everywhere.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "margin/classifier.hpp"
#include "margin/errors.hpp"
#include "margin/rng.hpp"
#include "margin/vec.hpp"

namespace margin {

class DenseNet;
struct ForwardTrace;

inline ForwardTrace forward_pass(const DenseNet& net, const Vec& x);
inline Vec backward_logit_gradient(const DenseNet& net, const ForwardTrace& trace, int i);

class DenseNet : public Classifier {
public:
    // layer_sizes = {in, hidden..., out}; weights[l] maps activations of
    // layer l (size sizes[l]) to pre-activations of layer l+1.
    std::vector<int> layer_sizes;
    std::vector<Matrix> weights;
    std::vector<Vec> biases;

    DenseNet() = default;

    explicit DenseNet(std::vector<int> sizes) : layer_sizes(std::move(sizes)) {
        validate_sizes();
        for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
            weights.emplace_back(layer_sizes[l + 1], layer_sizes[l]);
            biases.emplace_back(layer_sizes[l + 1], 0.0);
        }
    }

    // Glorot/Xavier uniform init: W_ij ~ U[-r, r], r = sqrt(6/(fan_in+fan_out)),
    // biases zero. Weight draw order is row major, layer by layer.
    static DenseNet glorot_init(std::vector<int> sizes, std::uint64_t seed) {
        DenseNet net(std::move(sizes));
        Rng rng(seed);
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
            Matrix& w = net.weights[l];
            double r = std::sqrt(6.0 / (w.cols + w.rows));
            for (double& v : w.data) v = rng.uniform(-r, r);
        }
        return net;
    }

    int input_dim() const override { return layer_sizes.front(); }
    int num_classes() const override { return layer_sizes.back(); }
    int num_layers() const { return static_cast<int>(weights.size()); }

    Vec logits(const Vec& x) const override;
    Vec logit_gradient(const Vec& x, int i) const override;

private:
    void validate_sizes() const {
        if (layer_sizes.size() < 2)
            throw InvalidInput("DenseNet: need at least input and output layers");
        for (int s : layer_sizes)
            if (s < 1) throw InvalidInput("DenseNet: layer sizes must be positive");
        if (layer_sizes.back() < 2)
            throw InvalidModel("DenseNet: need at least two output classes");
    }
};

// Everything the backward pass needs: pre-activations z and activations a for
// each layer. act[0] is the input, act[L] the logits.
struct ForwardTrace {
    std::vector<Vec> pre; // pre[l] = W_l act[l] + b_l, l = 0..L-1
    std::vector<Vec> act; // act[0] = x, act[l+1] = activation(pre[l])
};

inline double relu(double z) { return z > 0.0 ? z : 0.0; }
inline double relu_derivative(double z) { return z > 0.0 ? 1.0 : 0.0; }

inline ForwardTrace forward_pass(const DenseNet& net, const Vec& x) {
    if (static_cast<int>(x.size()) != net.input_dim())
        throw InvalidInput("forward_pass: input dimension mismatch");
    if (!all_finite(x)) throw InvalidInput("forward_pass: non-finite input");
    ForwardTrace t;
    t.act.push_back(x);
    for (int l = 0; l < net.num_layers(); ++l) {
        Vec z = matvec(net.weights[l], t.act.back());
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += net.biases[l][i];
        t.pre.push_back(z);
        bool output_layer = (l == net.num_layers() - 1);
        if (output_layer) {
            t.act.push_back(z); // identity output
        } else {
            Vec a(z.size());
            for (std::size_t i = 0; i < z.size(); ++i) a[i] = relu(z[i]);
            t.act.push_back(std::move(a));
        }
    }
    return t;
}

inline Vec forward_logits(const DenseNet& net, const Vec& x) {
    return forward_pass(net, x).act.back();
}

// d logit_i / d x by reverse accumulation through the trace.
inline Vec backward_logit_gradient(const DenseNet& net, const ForwardTrace& trace, int i) {
    if (i < 0 || i >= net.num_classes())
        throw InvalidInput("backward_logit_gradient: class index out of range");
    int L = net.num_layers();
    // delta = gradient w.r.t. pre-activation of the current layer
    Vec delta(net.num_classes(), 0.0);
    delta[i] = 1.0;
    for (int l = L - 1; l >= 0; --l) {
        const Matrix& w = net.weights[l];
        Vec prev(w.cols, 0.0);
        for (int r = 0; r < w.rows; ++r)
            for (int c = 0; c < w.cols; ++c)
                prev[c] += w.at(r, c) * delta[r];
        if (l > 0) {
            const Vec& z = trace.pre[l - 1];
            for (int c = 0; c < w.cols; ++c) prev[c] *= relu_derivative(z[c]);
        }
        delta = std::move(prev);
    }
    return delta;
}

inline Vec backward_logit_gradient(const DenseNet& net, const Vec& x, int i) {
    return backward_logit_gradient(net, forward_pass(net, x), i);
}

inline Vec DenseNet::logits(const Vec& x) const { return forward_logits(*this, x); }

inline Vec DenseNet::logit_gradient(const Vec& x, int i) const {
    check_class(i);
    return backward_logit_gradient(*this, x, i);
}

// ---- checkpoints ----------------------------------------------------------
// JSON layout: {"layer_sizes": [...], "layers": [{"weights": [[row]...],
// "bias": [...]}, ...]}. Weights are nested row arrays for readability.

inline void save_checkpoint(const DenseNet& net, const std::string& path) {
    nlohmann::ordered_json j;
    j["layer_sizes"] = net.layer_sizes;
    nlohmann::ordered_json layers = nlohmann::ordered_json::array();
    for (int l = 0; l < net.num_layers(); ++l) {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (int r = 0; r < net.weights[l].rows; ++r)
            rows.push_back(net.weights[l].row(r));
        layers.push_back({{"weights", rows}, {"bias", net.biases[l]}});
    }
    j["layers"] = layers;
    std::ofstream out(path);
    if (!out) throw FormatError("save_checkpoint: cannot open " + path);
    out << j.dump(2) << "\n";
}

inline DenseNet load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("load_checkpoint: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("load_checkpoint: " + path + ": " + e.what());
    }
    try {
        DenseNet net(j.at("layer_sizes").get<std::vector<int>>());
        const auto& layers = j.at("layers");
        if (static_cast<int>(layers.size()) != net.num_layers())
            throw FormatError("load_checkpoint: layer count mismatch");
        for (int l = 0; l < net.num_layers(); ++l) {
            const auto& rows = layers[l].at("weights");
            Matrix& w = net.weights[l];
            if (static_cast<int>(rows.size()) != w.rows)
                throw FormatError("load_checkpoint: weight row count mismatch");
            for (int r = 0; r < w.rows; ++r) {
                Vec row = rows[r].get<Vec>();
                if (static_cast<int>(row.size()) != w.cols)
                    throw FormatError("load_checkpoint: weight column count mismatch");
                for (int c = 0; c < w.cols; ++c) w.at(r, c) = row[c];
            }
            Vec b = layers[l].at("bias").get<Vec>();
            if (static_cast<int>(b.size()) != w.rows)
                throw FormatError("load_checkpoint: bias size mismatch");
            net.biases[l] = std::move(b);
        }
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("load_checkpoint: " + path + ": " + e.what());
    }
}

} // namespace margin
