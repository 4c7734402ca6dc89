#pragma once

// Synthetic 2-D datasets and the IDX image-file reader.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "margin/errors.hpp"
#include "margin/rng.hpp"
#include "margin/vec.hpp"

namespace margin {

struct LabeledPoint {
    Vec x;
    int label = 0;
};

using Dataset = std::vector<LabeledPoint>;

enum class DatasetKind { TwoMoons, GaussianBlobs };

// Two interleaving half circles (label 0 = outer arc, label 1 = inner arc)
// or two Gaussian blobs centred at (-2, 0) / (+2, 0). `noise` is the standard
// deviation of isotropic Gaussian jitter added to every coordinate. Point
// order is all of class 0 followed by all of class 1, each swept along its
// arc; shuffling is the trainer's job.
inline Dataset generate_dataset(DatasetKind kind, int count, double noise, std::uint64_t seed) {
    if (count < 1) throw InvalidInput("generate_dataset: count must be positive");
    if (!(noise >= 0.0)) throw InvalidInput("generate_dataset: negative noise");
    Rng rng(seed);
    int n1 = count / 2;      // inner / second blob
    int n0 = count - n1;     // outer / first blob
    Dataset data;
    data.reserve(count);
    const double pi = 3.14159265358979323846;
    auto sweep = [&](int n, int label) {
        for (int j = 0; j < n; ++j) {
            double t = n > 1 ? pi * j / (n - 1) : 0.0;
            Vec p;
            if (kind == DatasetKind::TwoMoons) {
                p = label == 0 ? Vec{std::cos(t), std::sin(t)}
                               : Vec{1.0 - std::cos(t), 0.5 - std::sin(t)};
            } else {
                p = label == 0 ? Vec{-2.0, 0.0} : Vec{2.0, 0.0};
            }
            p[0] += noise * rng.normal();
            p[1] += noise * rng.normal();
            data.push_back({std::move(p), label});
        }
    };
    sweep(n0, 0);
    sweep(n1, 1);
    return data;
}

namespace detail {
inline std::uint32_t read_be_u32(std::istream& in, const std::string& path, std::size_t offset) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw FormatError(path + ": truncated header at byte " + std::to_string(offset));
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}
} // namespace detail

// Reads an IDX image file (magic 0x00000803) plus its label file (magic
// 0x00000801). Pixels are scaled to [0, 1] by dividing by 255; each image is
// flattened row major. Reads at most `limit` items (negative = all).
inline Dataset load_idx_images(const std::string& images_path, const std::string& labels_path,
                               int limit) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw FormatError(images_path + ": cannot open");
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw FormatError(labels_path + ": cannot open");

    std::uint32_t img_magic = detail::read_be_u32(img, images_path, 0);
    if (img_magic != 0x00000803u)
        throw FormatError(images_path + ": bad magic " + std::to_string(img_magic) +
                          " at byte 0 (want 2051)");
    std::uint32_t n_img = detail::read_be_u32(img, images_path, 4);
    std::uint32_t rows = detail::read_be_u32(img, images_path, 8);
    std::uint32_t cols = detail::read_be_u32(img, images_path, 12);

    std::uint32_t lab_magic = detail::read_be_u32(lab, labels_path, 0);
    if (lab_magic != 0x00000801u)
        throw FormatError(labels_path + ": bad magic " + std::to_string(lab_magic) +
                          " at byte 0 (want 2049)");
    std::uint32_t n_lab = detail::read_be_u32(lab, labels_path, 4);

    if (n_img != n_lab)
        throw FormatError(images_path + ": image count " + std::to_string(n_img) +
                          " does not match label count " + std::to_string(n_lab));

    std::uint32_t take = n_img;
    if (limit >= 0 && static_cast<std::uint32_t>(limit) < take)
        take = static_cast<std::uint32_t>(limit);

    std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    std::vector<unsigned char> buf(pixels);
    Dataset data;
    data.reserve(take);
    for (std::uint32_t k = 0; k < take; ++k) {
        if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels)))
            throw FormatError(images_path + ": truncated image data at item " + std::to_string(k) +
                              " (byte " + std::to_string(16 + std::size_t(k) * pixels) + ")");
        char lbl = 0;
        if (!lab.read(&lbl, 1))
            throw FormatError(labels_path + ": truncated label data at item " + std::to_string(k) +
                              " (byte " + std::to_string(8 + std::size_t(k)) + ")");
        LabeledPoint p;
        p.x.resize(pixels);
        for (std::size_t i = 0; i < pixels; ++i) p.x[i] = buf[i] / 255.0;
        p.label = static_cast<unsigned char>(lbl);
        data.push_back(std::move(p));
    }
    return data;
}

} // namespace margin
