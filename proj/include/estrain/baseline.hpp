#pragma once

// Floating-point baseline training. This exists only to manufacture a
// deployed model for the recovery experiments: plain per-sample SGD with
// backpropagation, MSE against one-hot targets, relu hidden layers, raw
// linear outputs. The evolutionary-strategy path never touches it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "estrain/dataset.hpp"
#include "estrain/network.hpp"
#include "estrain/noise.hpp"

namespace estrain {

struct BaselineConfig {
    std::vector<int> dims;  // e.g. {64, 32, 16, 10}
    int epochs = 30;
    double learning_rate = 0.05;
    std::uint64_t seed = 1;
};

inline Model train_baseline(const Dataset& train, const BaselineConfig& cfg) {
    if (cfg.dims.size() < 2) throw std::invalid_argument("baseline: need at least two dims");
    if (cfg.dims.front() != train.dim || cfg.dims.back() != train.num_classes)
        throw std::invalid_argument("baseline: dims do not match dataset");
    if (cfg.epochs < 0 || cfg.learning_rate < 0)
        throw std::invalid_argument("baseline: negative epochs or learning rate");
    train.validate();

    const int L = int(cfg.dims.size()) - 1;
    std::vector<std::vector<double>> W(L), B(L);
    const std::uint64_t ws = derive_seed(cfg.seed, seed_tag::weight_init);
    for (int l = 0; l < L; ++l) {
        const int in = cfg.dims[l], out = cfg.dims[l + 1];
        W[l].resize(std::size_t(out) * in);
        B[l].assign(out, 0.0);
        const double scale = std::sqrt(2.0 / in);  // He init
        for (std::size_t k = 0; k < W[l].size(); ++k)
            W[l][k] = scale * normal(ws, std::uint64_t(l), k / in, k % in);
    }

    std::vector<std::vector<double>> act(L + 1), pre(L), delta(L);
    for (int l = 0; l < L; ++l) {
        pre[l].resize(cfg.dims[l + 1]);
        delta[l].resize(cfg.dims[l + 1]);
    }
    act[0].resize(train.dim);
    for (int l = 0; l < L; ++l) act[l + 1].resize(cfg.dims[l + 1]);

    std::vector<std::uint32_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = std::uint32_t(i);
    const std::uint64_t ss = derive_seed(cfg.seed, seed_tag::shuffle);

    const double lr = cfg.learning_rate;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size() - 1; i > 0; --i) {
            const std::size_t j = splitmix64(ss + epoch * 0x10001ull + i) % (i + 1);
            std::swap(order[i], order[j]);
        }
        double epoch_loss = 0;
        for (std::size_t s : order) {
            const float* x = train.sample(s);
            for (int j = 0; j < train.dim; ++j) act[0][j] = x[j];
            for (int l = 0; l < L; ++l) {
                const int in = cfg.dims[l], out = cfg.dims[l + 1];
                for (int r = 0; r < out; ++r) {
                    double a = B[l][r];
                    const double* wr = W[l].data() + std::size_t(r) * in;
                    for (int c = 0; c < in; ++c) a += wr[c] * act[l][c];
                    pre[l][r] = a;
                    act[l + 1][r] = (l + 1 < L && a < 0) ? 0.0 : a;
                }
            }
            const int y = train.labels[s];
            for (int r = 0; r < cfg.dims[L]; ++r) {
                const double err = act[L][r] - (r == y ? 1.0 : 0.0);
                delta[L - 1][r] = 2.0 * err / cfg.dims[L];
                epoch_loss += err * err / cfg.dims[L];
            }
            for (int l = L - 2; l >= 0; --l) {
                const int out = cfg.dims[l + 1], next = cfg.dims[l + 2];
                for (int r = 0; r < out; ++r) {
                    double d = 0;
                    for (int n = 0; n < next; ++n)
                        d += W[l + 1][std::size_t(n) * out + r] * delta[l + 1][n];
                    delta[l][r] = pre[l][r] > 0 ? d : 0.0;
                }
            }
            for (int l = 0; l < L; ++l) {
                const int in = cfg.dims[l], out = cfg.dims[l + 1];
                for (int r = 0; r < out; ++r) {
                    const double d = lr * delta[l][r];
                    double* wr = W[l].data() + std::size_t(r) * in;
                    for (int c = 0; c < in; ++c) wr[c] -= d * act[l][c];
                    B[l][r] -= d;
                }
            }
        }
        if (!std::isfinite(epoch_loss))
            throw std::runtime_error("baseline: training diverged (non-finite loss)");
    }

    Model m;
    m.input_dim = cfg.dims.front();
    m.num_classes = cfg.dims.back();
    for (int l = 0; l < L; ++l) {
        DenseLayer layer;
        layer.in_dim = cfg.dims[l];
        layer.out_dim = cfg.dims[l + 1];
        layer.activation = (l + 1 < L) ? Activation::relu : Activation::none;
        layer.float_storage = true;
        layer.wf.resize(W[l].size());
        layer.bf.resize(B[l].size());
        for (std::size_t k = 0; k < W[l].size(); ++k) layer.wf[k] = float(W[l][k]);
        for (std::size_t k = 0; k < B[l].size(); ++k) layer.bf[k] = float(B[l][k]);
        m.layers.push_back(std::move(layer));
    }
    m.validate();
    return m;
}

// ---------------------------------------------------------------------------
// Post-training quantization. Each layer gets the smallest power-of-two
// scale covering its largest |weight or bias|; weights and biases are then
// quantized to the shared layer format at that scale.

namespace detail {
inline int covering_scale_exp(double max_abs) {
    if (max_abs <= 0) return 0;
    int e = 0;
    const double m = std::frexp(max_abs, &e);  // max_abs = m * 2^e, m in [0.5, 1)
    const int s = (m == 0.5) ? e - 1 : e;
    return std::clamp(s, -30, 30);
}
}  // namespace detail

inline Model quantize_model(const Model& fm, const QuantSpec& spec = {}) {
    fm.validate();
    Model out;
    out.input_dim = fm.input_dim;
    out.num_classes = fm.num_classes;
    for (std::size_t i = 0; i < fm.layers.size(); ++i) {
        const auto& fl = fm.layers[i];
        if (!fl.float_storage)
            throw std::invalid_argument("quantize_model: layer already quantized");
        DenseLayer l;
        l.in_dim = fl.in_dim;
        l.out_dim = fl.out_dim;
        l.activation = fl.activation;
        l.weight_fmt = spec.weight_fmt;
        l.in_fmt = (i == 0) ? spec.input_fmt() : spec.hidden_fmt();
        l.act_fmt = (i + 1 == fm.layers.size()) ? spec.output_fmt() : spec.hidden_fmt();

        double max_abs = 0;
        for (float v : fl.wf) max_abs = std::max(max_abs, std::fabs(double(v)));
        for (float v : fl.bf) max_abs = std::max(max_abs, std::fabs(double(v)));
        l.scale_exp = detail::covering_scale_exp(max_abs);

        const double inv = std::ldexp(1.0, -l.scale_exp);
        l.w.resize(fl.wf.size());
        l.b.resize(fl.bf.size());
        for (std::size_t k = 0; k < fl.wf.size(); ++k)
            l.w[k] = std::int32_t(quantize(double(fl.wf[k]) * inv, l.weight_fmt).mantissa);
        for (std::size_t k = 0; k < fl.bf.size(); ++k)
            l.b[k] = std::int32_t(quantize(double(fl.bf[k]) * inv, l.weight_fmt).mantissa);
        out.layers.push_back(std::move(l));
    }
    out.validate();
    return out;
}

}  // namespace estrain
