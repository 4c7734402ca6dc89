// Victim models: analytic classifiers, the dense net with hand-written
// backprop, checkpoints, synthetic datasets, and the IDX reader.

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "margin/classifier.hpp"
#include "margin/data.hpp"
#include "margin/dense_net.hpp"
#include "margin/finite_diff.hpp"
#include "margin/train.hpp"

using namespace margin;

namespace {

// 2-2-2 net small enough to run on paper:
//   pre0 = W0 x + b0 = (-1, 3.5) -> relu -> (0, 3.5)
//   logits = W1 (0, 3.5) + b1 = (7.5, 3.5)
DenseNet tiny_net() {
    DenseNet net(std::vector<int>{2, 2, 2});
    net.weights[0].data = {1.0, -1.0, 0.5, 2.0};
    net.biases[0] = {0.0, -1.0};
    net.weights[1].data = {1.0, 2.0, -1.0, 1.0};
    net.biases[1] = {0.5, 0.0};
    return net;
}

std::filesystem::path tmp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

} // namespace

TEST_CASE("affine classifier evaluates W x + b", "[models]") {
    Matrix w(2, 3);
    w.data = {1.0, 0.0, -1.0, 2.0, 1.0, 0.5};
    AffineClassifier model(w, {0.5, -1.0});
    Vec l = model.logits({1.0, 2.0, 3.0});
    CHECK(l[0] == Catch::Approx(1.0 - 3.0 + 0.5));
    CHECK(l[1] == Catch::Approx(2.0 + 2.0 + 1.5 - 1.0));
    // gradient of a logit is its weight row, independent of x
    CHECK(model.logit_gradient({0.0, 0.0, 0.0}, 1) == Vec{2.0, 1.0, 0.5});
    CHECK_THROWS_AS(model.logits({1.0, 2.0}), InvalidInput);
    CHECK_THROWS_AS(model.logit_gradient({1.0, 2.0, 3.0}, 2), InvalidInput);
}

TEST_CASE("circle model: class 0 outside, gradient 2x", "[models]") {
    CircleModel circle(1.0);
    CHECK(argmax_index(circle.logits({2.0, 0.0})) == 0);
    CHECK(argmax_index(circle.logits({0.1, 0.2})) == 1);
    Vec g = circle.logit_gradient({0.5, -2.0}, 0);
    CHECK(g[0] == Catch::Approx(1.0));
    CHECK(g[1] == Catch::Approx(-4.0));
}

TEST_CASE("polynomial model separates on x2 - p(x1)", "[models]") {
    // p(t) = 0.5 - t + 2 t^2; at t = 1, p = 1.5, p' = 3
    PolynomialModel model({0.5, -1.0, 2.0});
    CHECK(argmax_index(model.logits({1.0, 2.0})) == 0); // above the curve
    CHECK(argmax_index(model.logits({1.0, 1.0})) == 1); // below
    Vec g = model.logit_gradient({1.0, 2.0}, 0);
    CHECK(g[0] == Catch::Approx(-3.0));
    CHECK(g[1] == Catch::Approx(1.0));
}

TEST_CASE("piecewise linear model interpolates its knots", "[models]") {
    PiecewiseLinearModel model({0.0, 1.0, 3.0}, {0.0, 2.0, 1.0});
    // inside segment 0 the boundary is y = 2 x
    CHECK(argmax_index(model.logits({0.5, 1.5})) == 0);
    CHECK(argmax_index(model.logits({0.5, 0.5})) == 1);
    Vec g = model.logit_gradient({0.5, 0.0}, 0);
    CHECK(g[0] == Catch::Approx(-2.0));
    // at a knot the right-hand segment's slope applies
    Vec gk = model.logit_gradient({1.0, 0.0}, 0);
    CHECK(gk[0] == Catch::Approx(0.5)); // segment 1 slope is (1-2)/(3-1)
    // extrapolation keeps the edge slopes
    Vec gl = model.logit_gradient({-5.0, 0.0}, 0);
    CHECK(gl[0] == Catch::Approx(-2.0));
    CHECK_THROWS_AS(PiecewiseLinearModel({1.0, 0.0}, {0.0, 1.0}), InvalidInput);
}

TEST_CASE("dense net forward pass matches the hand computation", "[models]") {
    DenseNet net = tiny_net();
    Vec l = net.logits({1.0, 2.0});
    CHECK(l[0] == 7.5);
    CHECK(l[1] == 3.5);
    ForwardTrace t = forward_pass(net, {1.0, 2.0});
    CHECK(t.pre[0] == Vec{-1.0, 3.5});
    CHECK(t.act[1] == Vec{0.0, 3.5}); // first unit is dead
    CHECK_THROWS_AS(net.logits({1.0}), InvalidInput);
}

TEST_CASE("dense net backward pass matches the hand computation", "[models]") {
    DenseNet net = tiny_net();
    // dead unit blocks the first column: grad l0 = W0^T (0, 2) = (1, 4)
    CHECK(net.logit_gradient({1.0, 2.0}, 0) == Vec{1.0, 4.0});
    CHECK(net.logit_gradient({1.0, 2.0}, 1) == Vec{0.5, 2.0});
    CHECK_THROWS_AS(net.logit_gradient({1.0, 2.0}, 5), InvalidInput);
}

TEST_CASE("rectifier kink: derivative at exactly zero is zero", "[models]") {
    CHECK(relu(0.0) == 0.0);
    CHECK(relu_derivative(0.0) == 0.0);
    CHECK(relu_derivative(1e-300) == 1.0);
    // a unit sitting exactly on its kink contributes nothing to the gradient
    DenseNet net(std::vector<int>{1, 1, 2});
    net.weights[0].data = {1.0};
    net.biases[0] = {0.0};
    net.weights[1].data = {1.0, -1.0};
    CHECK(net.logit_gradient({0.0}, 0) == Vec{0.0});
}

TEST_CASE("glorot init is seeded and bounded", "[models]") {
    DenseNet a = DenseNet::glorot_init({3, 16, 4}, 21);
    DenseNet b = DenseNet::glorot_init({3, 16, 4}, 21);
    DenseNet c = DenseNet::glorot_init({3, 16, 4}, 22);
    REQUIRE(a.weights.size() == 2);
    CHECK(a.weights[0].data == b.weights[0].data);
    CHECK(a.weights[1].data == b.weights[1].data);
    CHECK(a.weights[0].data != c.weights[0].data);
    double r0 = std::sqrt(6.0 / (3 + 16));
    for (double v : a.weights[0].data) {
        CHECK(std::fabs(v) <= r0);
    }
    for (double v : a.biases[0]) CHECK(v == 0.0);
}

TEST_CASE("backprop agrees with finite differences per family", "[models][property]") {
    Rng rng(314);
    DenseNet net = DenseNet::glorot_init({2, 12, 3}, 77);
    CircleModel circle(1.3);
    PolynomialModel poly({0.2, 0.7, -0.5, 0.1});
    PiecewiseLinearModel pw({-1.0, 0.0, 2.0}, {0.5, -0.5, 1.0});
    const Classifier* models[] = {&net, &circle, &poly, &pw};
    for (const Classifier* model : models) {
        for (int trial = 0; trial < 25; ++trial) {
            Vec x(model->input_dim());
            for (double& v : x) v = rng.uniform(-1.5, 1.5);
            int cls = rng.uniform_int(0, model->num_classes() - 1);
            Vec g = model->logit_gradient(x, cls);
            Vec fd = finite_diff_gradient(*model, x, cls, 1e-5);
            double denom = l2_norm(fd);
            double err = denom > 0.0 ? l2_norm(sub(g, fd)) / denom : l2_norm(g);
            CHECK(err < 1e-4);
        }
    }
}

TEST_CASE("finite differences are near-exact on affine models", "[models]") {
    Matrix w(2, 2);
    w.data = {0.3, -1.2, 2.0, 0.4};
    AffineClassifier model(w, {0.0, 1.0});
    Vec fd = finite_diff_gradient(model, {0.7, -0.4}, 0, 1e-5);
    CHECK(fd[0] == Catch::Approx(0.3).margin(1e-9));
    CHECK(fd[1] == Catch::Approx(-1.2).margin(1e-9));
}

TEST_CASE("checkpoint round trip is bit exact", "[models]") {
    DenseNet net = DenseNet::glorot_init({2, 5, 2}, 404);
    auto path = tmp_file("margin_test_ckpt.json");
    save_checkpoint(net, path.string());
    DenseNet back = load_checkpoint(path.string());
    REQUIRE(back.layer_sizes == net.layer_sizes);
    for (int l = 0; l < net.num_layers(); ++l) {
        CHECK(back.weights[l].data == net.weights[l].data);
        CHECK(back.biases[l] == net.biases[l]);
    }
    Vec x = {0.3, -0.8};
    CHECK(back.logits(x) == net.logits(x));
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader rejects malformed files", "[models]") {
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/net.json"), FormatError);
    auto path = tmp_file("margin_test_bad_ckpt.json");
    {
        std::ofstream out(path);
        out << "{ not json";
    }
    CHECK_THROWS_AS(load_checkpoint(path.string()), FormatError);
    {
        std::ofstream out(path);
        out << R"({"layer_sizes": [2, 2], "layers": [{"weights": [[1.0]], "bias": [0.0, 0.0]}]})";
    }
    CHECK_THROWS_AS(load_checkpoint(path.string()), FormatError); // row count mismatch
    std::filesystem::remove(path);
}

TEST_CASE("two moons with zero noise hits the arc endpoints", "[models]") {
    Dataset d = generate_dataset(DatasetKind::TwoMoons, 4, 0.0, 1);
    REQUIRE(d.size() == 4);
    CHECK(d[0].x[0] == Catch::Approx(1.0));
    CHECK(d[0].x[1] == Catch::Approx(0.0).margin(1e-12));
    CHECK(d[1].x[0] == Catch::Approx(-1.0));
    CHECK(d[0].label == 0);
    CHECK(d[1].label == 0);
    CHECK(d[2].x[0] == Catch::Approx(0.0).margin(1e-12));
    CHECK(d[2].x[1] == Catch::Approx(0.5));
    CHECK(d[3].x[0] == Catch::Approx(2.0));
    CHECK(d[3].x[1] == Catch::Approx(0.5).margin(1e-12));
    CHECK(d[2].label == 1);
    CHECK(d[3].label == 1);
}

TEST_CASE("blobs sit at their centres and datasets are seeded", "[models]") {
    Dataset d = generate_dataset(DatasetKind::GaussianBlobs, 6, 0.0, 9);
    for (int i = 0; i < 3; ++i) {
        CHECK(d[i].x == Vec{-2.0, 0.0});
        CHECK(d[i].label == 0);
        CHECK(d[i + 3].x == Vec{2.0, 0.0});
        CHECK(d[i + 3].label == 1);
    }
    Dataset a = generate_dataset(DatasetKind::TwoMoons, 30, 0.2, 5);
    Dataset b = generate_dataset(DatasetKind::TwoMoons, 30, 0.2, 5);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].x == b[i].x);
    CHECK_THROWS_AS(generate_dataset(DatasetKind::TwoMoons, 0, 0.1, 1), InvalidInput);
    CHECK_THROWS_AS(generate_dataset(DatasetKind::TwoMoons, 4, -0.1, 1), InvalidInput);
}

namespace {

void write_be_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<char*>(b), 4);
}

void write_idx_pair(const std::filesystem::path& img, const std::filesystem::path& lab,
                    int count, int truncate_last = 0, std::uint32_t img_magic = 0x803,
                    int label_count = -1) {
    std::ofstream io(img, std::ios::binary);
    write_be_u32(io, img_magic);
    write_be_u32(io, count);
    write_be_u32(io, 2);
    write_be_u32(io, 2);
    for (int k = 0; k < count; ++k)
        for (int p = 0; p < 4 - (k == count - 1 ? truncate_last : 0); ++p) {
            unsigned char byte = static_cast<unsigned char>(51 * (k + p));
            io.write(reinterpret_cast<char*>(&byte), 1);
        }
    io.close();
    std::ofstream lo(lab, std::ios::binary);
    write_be_u32(lo, 0x801);
    write_be_u32(lo, label_count < 0 ? count : label_count);
    for (int k = 0; k < count; ++k) {
        unsigned char byte = static_cast<unsigned char>(k % 3);
        lo.write(reinterpret_cast<char*>(&byte), 1);
    }
}

} // namespace

TEST_CASE("idx reader scales pixels and honours the limit", "[models]") {
    auto img = tmp_file("margin_test_images.idx");
    auto lab = tmp_file("margin_test_labels.idx");
    write_idx_pair(img, lab, 3);
    Dataset d = load_idx_images(img.string(), lab.string(), -1);
    REQUIRE(d.size() == 3);
    REQUIRE(d[0].x.size() == 4);
    CHECK(d[0].x[0] == 0.0);
    CHECK(d[0].x[1] == Catch::Approx(51.0 / 255.0));
    CHECK(d[1].x[0] == Catch::Approx(51.0 / 255.0));
    CHECK(d[0].label == 0);
    CHECK(d[2].label == 2);
    CHECK(load_idx_images(img.string(), lab.string(), 2).size() == 2);
    CHECK(load_idx_images(img.string(), lab.string(), 0).empty());
    std::filesystem::remove(img);
    std::filesystem::remove(lab);
}

TEST_CASE("idx reader reports bad files with byte offsets", "[models]") {
    auto img = tmp_file("margin_test_images.idx");
    auto lab = tmp_file("margin_test_labels.idx");
    CHECK_THROWS_AS(load_idx_images("/nonexistent.idx", "/nonexistent.idx", -1), FormatError);
    write_idx_pair(img, lab, 2, 0, 0x802);
    CHECK_THROWS_WITH(load_idx_images(img.string(), lab.string(), -1),
                      Catch::Matchers::ContainsSubstring("bad magic"));
    write_idx_pair(img, lab, 2, 2); // last image short by two bytes
    CHECK_THROWS_WITH(load_idx_images(img.string(), lab.string(), -1),
                      Catch::Matchers::ContainsSubstring("truncated image data at item 1"));
    write_idx_pair(img, lab, 2, 0, 0x803, 5); // count mismatch
    CHECK_THROWS_WITH(load_idx_images(img.string(), lab.string(), -1),
                      Catch::Matchers::ContainsSubstring("does not match label count"));
    std::filesystem::remove(img);
    std::filesystem::remove(lab);
}

TEST_CASE("training is deterministic and learns two moons", "[models]") {
    Dataset data = generate_dataset(DatasetKind::TwoMoons, 400, 0.1, 7);
    TrainResult a = train_dense_net(data, {2, 16, 2}, 40, 0.05, 7);
    TrainResult b = train_dense_net(data, {2, 16, 2}, 40, 0.05, 7);
    CHECK(a.final_accuracy >= 0.95);
    CHECK(a.final_accuracy == b.final_accuracy);
    for (int l = 0; l < a.net.num_layers(); ++l) {
        CHECK(a.net.weights[l].data == b.net.weights[l].data); // bit exact
        CHECK(a.net.biases[l] == b.net.biases[l]);
    }
    CHECK(accuracy(a.net, data) == a.final_accuracy);
}
