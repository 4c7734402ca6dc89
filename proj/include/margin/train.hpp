#pragma once

// Plain per-sample SGD on softmax cross-entropy. Deliberately simple: the
// nets trained here are 2-D toy models whose only job is to provide smooth
// decision boundaries for attack experiments.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "margin/data.hpp"
#include "margin/dense_net.hpp"
#include "margin/errors.hpp"
#include "margin/rng.hpp"

namespace margin {

inline double accuracy(const Classifier& model, const Dataset& data) {
    if (data.empty()) throw InvalidInput("accuracy: empty dataset");
    int hits = 0;
    for (const LabeledPoint& p : data)
        if (argmax_index(model.logits(p.x)) == p.label) ++hits;
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

struct TrainResult {
    DenseNet net;
    double final_accuracy = 0.0; // on the training set
};

// Weight init and the per-epoch shuffle both come from `seed`, so a given
// (data, layer_sizes, epochs, learning_rate, seed) tuple trains to
// bit-identical weights on any platform.
inline TrainResult train_dense_net(const Dataset& data, std::vector<int> layer_sizes,
                                   int epochs, double learning_rate, std::uint64_t seed) {
    if (data.empty()) throw InvalidInput("train_dense_net: empty dataset");
    if (epochs < 0) throw InvalidInput("train_dense_net: negative epoch count");
    if (!(learning_rate > 0.0)) throw InvalidInput("train_dense_net: learning rate must be positive");
    DenseNet net = DenseNet::glorot_init(std::move(layer_sizes), derive_seed(seed, 0));
    int C = net.num_classes();
    for (const LabeledPoint& p : data) {
        if (static_cast<int>(p.x.size()) != net.input_dim())
            throw InvalidInput("train_dense_net: sample dimension mismatch");
        if (p.label < 0 || p.label >= C)
            throw InvalidInput("train_dense_net: label out of range");
    }

    Rng shuffle_rng(derive_seed(seed, 1));
    std::vector<int> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (int idx : order) {
            const LabeledPoint& p = data[idx];
            ForwardTrace trace = forward_pass(net, p.x);
            const Vec& logits = trace.act.back();

            // softmax probabilities, max-shifted for stability
            double mx = logits[argmax_index(logits)];
            Vec prob(C);
            double z = 0.0;
            for (int i = 0; i < C; ++i) {
                prob[i] = std::exp(logits[i] - mx);
                z += prob[i];
            }
            for (int i = 0; i < C; ++i) prob[i] /= z;

            // dLoss/dlogit = softmax - onehot; backprop layer by layer,
            // updating in place (plain SGD, no momentum).
            Vec delta = prob;
            delta[p.label] -= 1.0;
            for (int l = net.num_layers() - 1; l >= 0; --l) {
                Matrix& w = net.weights[l];
                const Vec& a_in = trace.act[l];
                Vec prev(w.cols, 0.0);
                for (int r = 0; r < w.rows; ++r)
                    for (int c = 0; c < w.cols; ++c)
                        prev[c] += w.at(r, c) * delta[r];
                for (int r = 0; r < w.rows; ++r) {
                    for (int c = 0; c < w.cols; ++c)
                        w.at(r, c) -= learning_rate * delta[r] * a_in[c];
                    net.biases[l][r] -= learning_rate * delta[r];
                }
                if (l > 0) {
                    const Vec& zpre = trace.pre[l - 1];
                    for (int c = 0; c < w.cols; ++c) prev[c] *= relu_derivative(zpre[c]);
                }
                delta = std::move(prev);
            }
        }
    }
    double acc = accuracy(net, data);
    return {std::move(net), acc};
}

} // namespace margin
