#pragma once

// Datasets: IDX file ingestion, train/validation splits, Gaussian input
// corruption, a synthetic blob generator for machine-independent runs, and
// accuracy evaluation.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "estrain/network.hpp"
#include "estrain/noise.hpp"
#include "estrain/serial.hpp"

namespace estrain {

struct DataError : std::runtime_error {
    enum class Kind { bad_magic, truncated, count_mismatch };
    Kind kind;
    DataError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

struct Dataset {
    std::vector<float> features;  // M x dim row-major, values in [0, 1]
    std::vector<std::int32_t> labels;
    int dim = 0;
    int num_classes = 0;

    std::size_t size() const { return labels.size(); }
    const float* sample(std::size_t i) const { return features.data() + i * dim; }

    void validate() const {
        if (labels.empty() || dim <= 0 || num_classes <= 0)
            throw std::invalid_argument("dataset: empty");
        if (features.size() != labels.size() * std::size_t(dim))
            throw std::invalid_argument("dataset: feature/label size mismatch");
        for (auto l : labels)
            if (l < 0 || l >= num_classes)
                throw std::invalid_argument("dataset: label out of range");
    }
};

// ---------------------------------------------------------------------------
// IDX format (big-endian): 0x00000803 image files with M x rows x cols
// unsigned bytes, 0x00000801 label files. Pixels scale to [0,1] by /255.

namespace detail {
inline std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}
}  // namespace detail

inline Dataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
    using Kind = DataError::Kind;
    const auto img = serial::read_file(images_path);
    const auto lab = serial::read_file(labels_path);

    if (img.size() < 16)
        throw DataError(Kind::truncated, "idx: image header truncated");
    if (detail::be32(img.data()) != 0x00000803u)
        throw DataError(Kind::bad_magic, "idx: bad image magic");
    const std::uint32_t m = detail::be32(img.data() + 4);
    const std::uint32_t rows = detail::be32(img.data() + 8);
    const std::uint32_t cols = detail::be32(img.data() + 12);
    const std::size_t want = 16 + std::size_t(m) * rows * cols;
    if (img.size() < want)
        throw DataError(Kind::truncated, "idx: image payload truncated");

    if (lab.size() < 8)
        throw DataError(Kind::truncated, "idx: label header truncated");
    if (detail::be32(lab.data()) != 0x00000801u)
        throw DataError(Kind::bad_magic, "idx: bad label magic");
    const std::uint32_t ml = detail::be32(lab.data() + 4);
    if (lab.size() < 8 + std::size_t(ml))
        throw DataError(Kind::truncated, "idx: label payload truncated");
    if (ml != m)
        throw DataError(Kind::count_mismatch, "idx: " + std::to_string(m) + " images vs " +
                                                  std::to_string(ml) + " labels");

    Dataset d;
    d.dim = int(rows * cols);
    d.num_classes = 10;
    d.features.resize(std::size_t(m) * d.dim);
    d.labels.resize(m);
    for (std::size_t i = 0; i < std::size_t(m) * rows * cols; ++i)
        d.features[i] = float(img[16 + i]) / 255.0f;
    for (std::size_t i = 0; i < m; ++i) d.labels[i] = lab[8 + i];
    d.validate();
    return d;
}

// Deterministic split: optional seeded shuffle, then first n_train /
// remainder.
inline std::pair<Dataset, Dataset> split(const Dataset& d, std::size_t n_train,
                                         std::uint64_t shuffle_seed = 0,
                                         bool shuffle = false) {
    if (n_train == 0 || n_train >= d.size())
        throw std::invalid_argument("split: n_train out of range");
    std::vector<std::uint32_t> order(d.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = std::uint32_t(i);
    if (shuffle) {
        const std::uint64_t s = derive_seed(shuffle_seed, seed_tag::shuffle);
        for (std::size_t i = order.size() - 1; i > 0; --i) {
            const std::size_t j = splitmix64(s + i) % (i + 1);
            std::swap(order[i], order[j]);
        }
    }
    auto take = [&](std::size_t begin, std::size_t end) {
        Dataset out;
        out.dim = d.dim;
        out.num_classes = d.num_classes;
        out.features.reserve((end - begin) * d.dim);
        out.labels.reserve(end - begin);
        for (std::size_t k = begin; k < end; ++k) {
            const float* s0 = d.sample(order[k]);
            out.features.insert(out.features.end(), s0, s0 + d.dim);
            out.labels.push_back(d.labels[order[k]]);
        }
        return out;
    };
    return {take(0, n_train), take(n_train, d.size())};
}

// x' = clamp(x + n, 0, 1) with n ~ N(0, sigma^2) per pixel; labels
// untouched. Deterministic per seed regardless of evaluation order.
inline Dataset inject_noise(const Dataset& d, double sigma, std::uint64_t seed) {
    if (sigma < 0) throw std::invalid_argument("inject_noise: sigma < 0");
    Dataset out = d;
    if (sigma == 0) return out;
    const std::uint64_t s = derive_seed(seed, seed_tag::input_noise);
    for (std::size_t i = 0; i < d.size(); ++i) {
        float* row = out.features.data() + i * d.dim;
        for (int j = 0; j < d.dim; ++j) {
            const double n = sigma * normal(s, 0, i, std::size_t(j));
            row[j] = float(std::clamp(double(row[j]) + n, 0.0, 1.0));
        }
    }
    return out;
}

// Gaussian class blobs in [0,1]^dim with round-robin labels. Centroids are
// hashed from the seed; cluster spread is fixed so a small dense model
// separates the classes cleanly.
inline Dataset generate_synthetic(int num_classes, int dim, std::size_t m, std::uint64_t seed,
                                  double cluster_sigma = 0.08) {
    if (num_classes <= 0 || dim <= 0 || m == 0)
        throw std::invalid_argument("generate_synthetic: non-positive parameter");
    const std::uint64_t s = derive_seed(seed, seed_tag::synthetic_data);
    std::vector<double> centroids(std::size_t(num_classes) * dim);
    for (int c = 0; c < num_classes; ++c)
        for (int j = 0; j < dim; ++j) {
            const double u = double(splitmix64(detail::mix_coords(s, 1, c, j)) >> 11) * 0x1.0p-53;
            centroids[std::size_t(c) * dim + j] = 0.15 + 0.70 * u;
        }
    Dataset d;
    d.dim = dim;
    d.num_classes = num_classes;
    d.features.resize(m * dim);
    d.labels.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const int c = int(i % num_classes);
        d.labels[i] = c;
        for (int j = 0; j < dim; ++j) {
            const double v =
                centroids[std::size_t(c) * dim + j] + cluster_sigma * normal(s, 0, i, j);
            d.features[i * dim + j] = float(std::clamp(v, 0.0, 1.0));
        }
    }
    return d;
}

// ---------------------------------------------------------------------------
// Accuracy: fraction of samples whose argmax output matches the label.

inline double evaluate_accuracy(const Model& model, const Dataset& d) {
    if (d.dim != model.input_dim)
        throw std::invalid_argument("evaluate_accuracy: dimension mismatch");
    Evaluator ev(model);
    std::vector<double> out(model.num_classes);
    std::size_t hits = 0;
    if (ev.first_layer_real()) {
        std::vector<double> x(d.dim);
        for (std::size_t i = 0; i < d.size(); ++i) {
            const float* row = d.sample(i);
            for (int j = 0; j < d.dim; ++j) x[j] = row[j];
            ev.forward_r(x.data(), out.data());
            if (argmax_lowest_tie(out.data(), model.num_classes) == d.labels[i]) ++hits;
        }
    } else {
        const QFormat f = model.layers.front().in_fmt;
        std::vector<std::int32_t> xm(d.dim);
        for (std::size_t i = 0; i < d.size(); ++i) {
            const float* row = d.sample(i);
            for (int j = 0; j < d.dim; ++j)
                xm[j] = std::int32_t(quantize(row[j], f).mantissa);
            ev.forward_q(xm.data(), out.data());
            if (argmax_lowest_tie(out.data(), model.num_classes) == d.labels[i]) ++hits;
        }
    }
    return double(hits) / double(d.size());
}

// Pre-quantized input view used by the training hot loop.
struct QuantizedInputs {
    std::vector<std::int32_t> mantissas;  // M x dim
    std::vector<double> reals;            // same values, exact
    int dim = 0;

    QuantizedInputs(const Dataset& d, const QFormat& fmt) : dim(d.dim) {
        mantissas.resize(d.features.size());
        reals.resize(d.features.size());
        const double step = std::ldexp(1.0, -fmt.frac_bits);
        for (std::size_t i = 0; i < d.features.size(); ++i) {
            const auto m = quantize(d.features[i], fmt).mantissa;
            mantissas[i] = std::int32_t(m);
            reals[i] = double(m) * step;
        }
    }
    const std::int32_t* sample_m(std::size_t i) const { return mantissas.data() + i * dim; }
    const double* sample_r(std::size_t i) const { return reals.data() + i * dim; }
};

}  // namespace estrain
