#pragma once

// Quantized fully-connected network: layer and model types, the forward
// pass, prediction, and perturbation views for population-based training.
//
// Layers come in two storage kinds:
//  * quantized: integer mantissas in a per-layer Q-format with an optional
//    power-of-two output scale; the MAC runs in a 32-bit saturating
//    accumulator;
//  * float32: reference-precision weights used by the floating-point
//    training path and by freshly trained baseline models.
//
// Models are immutable once built. Perturbation views copy only the
// affected layer, so population members can be evaluated concurrently
// against one shared base model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "estrain/fixed_point.hpp"

namespace estrain {

enum class Activation : std::uint8_t { none = 0, relu = 1 };

struct DenseLayer {
    int in_dim = 0;
    int out_dim = 0;
    Activation activation = Activation::relu;
    int scale_exp = 0;  // output scaled by 2^scale_exp before requantization

    bool float_storage = false;

    // Quantized storage.
    QFormat weight_fmt{};  // weights and biases share this format
    QFormat in_fmt{};      // expected input format
    QFormat act_fmt{};     // output format
    std::vector<std::int32_t> w;  // out_dim x in_dim mantissas, row-major
    std::vector<std::int32_t> b;  // out_dim mantissas

    // Float32 storage.
    std::vector<float> wf;
    std::vector<float> bf;

    std::size_t weight_count() const { return std::size_t(out_dim) * in_dim; }
    std::size_t param_count() const { return weight_count() + out_dim; }

    double weight_value(int r, int c) const {
        if (float_storage) return wf[std::size_t(r) * in_dim + c];
        return std::ldexp(double(w[std::size_t(r) * in_dim + c]),
                          scale_exp - weight_fmt.frac_bits);
    }
    double bias_value(int r) const {
        if (float_storage) return bf[r];
        return std::ldexp(double(b[r]), scale_exp - weight_fmt.frac_bits);
    }
};

struct Model {
    std::vector<DenseLayer> layers;
    int input_dim = 0;
    int num_classes = 0;

    void validate() const;
    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.param_count();
        return n;
    }
};

inline void Model::validate() const {
    if (layers.empty()) throw std::invalid_argument("model: no layers");
    if (layers.front().in_dim != input_dim)
        throw std::invalid_argument("model: first layer in_dim != input_dim");
    if (layers.back().out_dim != num_classes)
        throw std::invalid_argument("model: last layer out_dim != num_classes");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.in_dim <= 0 || l.out_dim <= 0)
            throw std::invalid_argument("model: non-positive layer dimension");
        if (i + 1 < layers.size() && l.out_dim != layers[i + 1].in_dim)
            throw std::invalid_argument("model: dimension chain broken at layer " +
                                        std::to_string(i));
        if (l.float_storage) {
            if (l.wf.size() != l.weight_count() || l.bf.size() != std::size_t(l.out_dim))
                throw std::invalid_argument("model: float layer storage size mismatch");
        } else {
            require_valid(l.weight_fmt);
            require_valid(l.in_fmt);
            require_valid(l.act_fmt);
            if (l.w.size() != l.weight_count() || l.b.size() != std::size_t(l.out_dim))
                throw std::invalid_argument("model: layer storage size mismatch");
            // A quantized layer feeding a quantized layer must hand over
            // mantissas in the downstream input format.
            if (i + 1 < layers.size() && !layers[i + 1].float_storage &&
                l.act_fmt != layers[i + 1].in_fmt)
                throw std::invalid_argument("model: activation/input format mismatch at layer " +
                                            std::to_string(i));
        }
    }
}

// Formats used when a float model is quantized for deployment. The
// activation width follows the training-precision width; hidden
// activations are unsigned after relu, the raw output layer is signed.
struct QuantSpec {
    QFormat weight_fmt = QFormat::sgn(4, 3);
    int act_bits = 16;

    QFormat input_fmt() const { return QFormat::uns(act_bits, act_bits - 4); }
    QFormat hidden_fmt() const { return QFormat::uns(act_bits, act_bits - 4); }
    QFormat output_fmt() const { return QFormat::sgn(act_bits, act_bits - 5); }
};

// Zero-initialized quantized model for a dims chain such as {64,32,16,10}.
inline Model make_model(const std::vector<int>& dims, const QuantSpec& spec = {}) {
    if (dims.size() < 2) throw std::invalid_argument("make_model: need at least two dims");
    Model m;
    m.input_dim = dims.front();
    m.num_classes = dims.back();
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        DenseLayer l;
        l.in_dim = dims[i];
        l.out_dim = dims[i + 1];
        const bool last = (i + 2 == dims.size());
        l.activation = last ? Activation::none : Activation::relu;
        l.weight_fmt = spec.weight_fmt;
        l.in_fmt = (i == 0) ? spec.input_fmt() : spec.hidden_fmt();
        l.act_fmt = last ? spec.output_fmt() : spec.hidden_fmt();
        l.w.assign(l.weight_count(), 0);
        l.b.assign(std::size_t(l.out_dim), 0);
        m.layers.push_back(std::move(l));
    }
    m.validate();
    return m;
}

// ---------------------------------------------------------------------------
// Weight mask: selects the trainable subset of one layer. Flat indices
// cover the weights row-major, then the biases.

struct WeightMask {
    int layer_index = 0;
    bool all = true;
    std::vector<std::uint32_t> indices;  // ascending, unique, used when !all

    std::size_t count(const Model& m) const {
        validate(m);
        return all ? m.layers[layer_index].param_count() : indices.size();
    }

    void validate(const Model& m) const {
        if (layer_index < 0 || std::size_t(layer_index) >= m.layers.size())
            throw std::invalid_argument("mask: layer index out of range");
        if (all) return;
        if (indices.empty()) throw std::invalid_argument("mask: empty selection");
        const std::size_t n = m.layers[layer_index].param_count();
        std::uint32_t prev = 0;
        bool first = true;
        for (auto ix : indices) {
            if (ix >= n) throw std::invalid_argument("mask: index out of range");
            if (!first && ix <= prev) throw std::invalid_argument("mask: indices not ascending");
            prev = ix;
            first = false;
        }
    }

    bool operator==(const WeightMask& o) const {
        return layer_index == o.layer_index && all == o.all && indices == o.indices;
    }
};

// ---------------------------------------------------------------------------
// Reference forward pass, written directly against the accumulator
// contract. The fast engine below is checked against this in tests.

inline std::vector<Fixed> dense_forward(const DenseLayer& l, const std::vector<Fixed>& input) {
    if (l.float_storage)
        throw std::invalid_argument("dense_forward: quantized layers only");
    if (std::ssize(input) != l.in_dim)
        throw std::invalid_argument("dense_forward: input length " +
                                    std::to_string(input.size()) + " != in_dim " +
                                    std::to_string(l.in_dim));
    const int acc_frac = l.weight_fmt.frac_bits + l.in_fmt.frac_bits;
    std::vector<Fixed> out(l.out_dim);
    for (int r = 0; r < l.out_dim; ++r) {
        Accumulator acc{0, acc_frac};
        // Bias enters pre-aligned to the accumulator fraction.
        acc.value = saturating_add32(
            acc.value, std::int64_t{l.b[r]} << l.in_fmt.frac_bits);
        for (int c = 0; c < l.in_dim; ++c) {
            Fixed wv{l.w[std::size_t(r) * l.in_dim + c], l.weight_fmt};
            Fixed xv{input[c].mantissa, l.in_fmt};
            fixed_mul_acc(wv, xv, acc);
        }
        std::int64_t a = acc.value;
        if (l.activation == Activation::relu && a < 0) a = 0;
        out[r] = requantize(a, acc_frac - l.scale_exp, l.act_fmt);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fast evaluation engine. Hot loops run on raw mantissa arrays; rows whose
// worst-case sum provably fits in 32 bits take an exact vectorizable
// kernel, the rest fall back to per-step saturation (identical results
// when no saturation occurs).

namespace detail {

inline std::int64_t abs64(std::int64_t v) { return v < 0 ? -v : v; }

inline std::int32_t dot_row_exact(const std::int32_t* w, const std::int32_t* x, int n,
                                  std::int64_t bias_aligned) {
    std::int64_t acc = bias_aligned;
    for (int c = 0; c < n; ++c) acc += std::int64_t{w[c]} * x[c];
    return static_cast<std::int32_t>(acc);
}

inline std::int32_t dot_row_saturating(const std::int32_t* w, const std::int32_t* x, int n,
                                       std::int64_t bias_aligned) {
    std::int32_t acc = saturating_add32(0, bias_aligned);
    for (int c = 0; c < n; ++c)
        acc = saturating_add32(acc, std::int64_t{w[c]} * x[c]);
    return acc;
}

struct LayerPlan {
    const DenseLayer* layer = nullptr;
    bool real_path = false;  // float storage or real-valued override

    const std::int32_t* wm = nullptr;
    const std::int32_t* bm = nullptr;
    const double* wr = nullptr;
    const double* br = nullptr;

    std::vector<std::int64_t> bias_aligned;
    std::vector<std::uint8_t> row_fast;
    int src_frac = 0;  // accumulator fraction minus scale_exp

    // Output handling.
    bool quantize_out = true;  // real-path layers feeding a raw boundary skip this
    QFormat out_fmt{};
    bool relu = false;
};

}  // namespace detail

class Evaluator {
public:
    explicit Evaluator(const Model& m) : model_(&m) {
        plans_.resize(m.layers.size());
        for (std::size_t i = 0; i < m.layers.size(); ++i) rebuild_plan(i);
        std::size_t widest = std::size_t(m.input_dim);
        for (const auto& l : m.layers) widest = std::max(widest, std::size_t(l.out_dim));
        ibuf_[0].resize(widest);
        ibuf_[1].resize(widest);
        rbuf_[0].resize(widest);
        rbuf_[1].resize(widest);
    }

    Evaluator(const Evaluator&) = delete;
    Evaluator& operator=(const Evaluator&) = delete;

    // Replace one quantized layer's mantissas for the next evaluations.
    void override_quant(int layer, std::vector<std::int32_t> w, std::vector<std::int32_t> b) {
        check_override(layer, w.size(), b.size());
        if (model_->layers[layer].float_storage)
            throw std::invalid_argument("override_quant: layer has float storage");
        ov_layer_ = layer;
        ov_real_ = false;
        ov_w_ = std::move(w);
        ov_b_ = std::move(b);
        rebuild_plan(std::size_t(layer));
    }

    // Replace one layer's weights with reference-precision values.
    void override_real(int layer, std::vector<double> w, std::vector<double> b) {
        check_override(layer, w.size(), b.size());
        ov_layer_ = layer;
        ov_real_ = true;
        ov_wr_ = std::move(w);
        ov_br_ = std::move(b);
        rebuild_plan(std::size_t(layer));
    }

    void clear_override() {
        if (ov_layer_ < 0) return;
        const int l = ov_layer_;
        ov_layer_ = -1;
        rebuild_plan(std::size_t(l));
    }

    bool first_layer_real() const { return plans_.front().real_path; }

    // Input as mantissas in the first layer's input format.
    void forward_q(const std::int32_t* xm, double* out) {
        run(xm, nullptr, out, nullptr);
    }
    // Input as raw reals (first layer on the real path).
    void forward_r(const double* x, double* out) {
        run(nullptr, x, out, nullptr);
    }
    // Final-layer mantissas (quantized output layers only).
    void forward_q_mantissas(const std::int32_t* xm, std::int32_t* out_m) {
        run(xm, nullptr, nullptr, out_m);
    }
    void forward_r_mantissas(const double* x, std::int32_t* out_m) {
        run(nullptr, x, nullptr, out_m);
    }

    int num_outputs() const { return model_->num_classes; }

private:
    void check_override(int layer, std::size_t wn, std::size_t bn) const {
        if (layer < 0 || std::size_t(layer) >= model_->layers.size())
            throw std::invalid_argument("override: layer out of range");
        const auto& l = model_->layers[layer];
        if (wn != l.weight_count() || bn != std::size_t(l.out_dim))
            throw std::invalid_argument("override: size mismatch");
        if (ov_layer_ >= 0 && ov_layer_ != layer)
            throw std::invalid_argument("override: one layer at a time");
    }

    void rebuild_plan(std::size_t i);
    void run(const std::int32_t* xm, const double* xr, double* out, std::int32_t* out_m);

    const Model* model_;
    std::vector<detail::LayerPlan> plans_;
    int ov_layer_ = -1;
    bool ov_real_ = false;
    std::vector<std::int32_t> ov_w_, ov_b_;
    std::vector<double> ov_wr_, ov_br_;
    std::vector<std::int32_t> ibuf_[2];
    std::vector<double> rbuf_[2];
};

inline void Evaluator::rebuild_plan(std::size_t i) {
    const DenseLayer& l = model_->layers[i];
    detail::LayerPlan p;
    p.layer = &l;
    p.relu = l.activation == Activation::relu;

    const bool overridden = (ov_layer_ == int(i));
    p.real_path = overridden ? ov_real_ : l.float_storage;

    const bool last = (i + 1 == model_->layers.size());
    if (p.real_path) {
        p.wr = overridden && ov_real_ ? ov_wr_.data() : nullptr;
        p.br = overridden && ov_real_ ? ov_br_.data() : nullptr;
        // Quantize at the boundary into a downstream quantized layer. An
        // overridden layer is still quantized underneath, so the boundary
        // format is always the downstream layer's own input format.
        if (!last && !model_->layers[i + 1].float_storage) {
            p.quantize_out = true;
            p.out_fmt = model_->layers[i + 1].in_fmt;
        } else {
            p.quantize_out = false;
        }
        plans_[i] = std::move(p);
        return;
    }

    p.wm = overridden ? ov_w_.data() : l.w.data();
    p.bm = overridden ? ov_b_.data() : l.b.data();
    p.src_frac = l.weight_fmt.frac_bits + l.in_fmt.frac_bits - l.scale_exp;
    p.out_fmt = l.act_fmt;

    const std::int64_t xmax =
        std::max(detail::abs64(l.in_fmt.min_mantissa()), l.in_fmt.max_mantissa());
    p.bias_aligned.resize(l.out_dim);
    p.row_fast.assign(l.out_dim, 1);
    for (int r = 0; r < l.out_dim; ++r) {
        p.bias_aligned[r] = std::int64_t{p.bm[r]} << l.in_fmt.frac_bits;
        std::int64_t bound = detail::abs64(p.bias_aligned[r]);
        const std::int32_t* wr = p.wm + std::size_t(r) * l.in_dim;
        for (int c = 0; c < l.in_dim; ++c) {
            bound += detail::abs64(wr[c]) * xmax;
            if (bound > std::numeric_limits<std::int32_t>::max()) {
                p.row_fast[r] = 0;
                break;
            }
        }
    }
    plans_[i] = std::move(p);
}

inline void Evaluator::run(const std::int32_t* xm, const double* xr, double* out,
                           std::int32_t* out_m) {
    bool have_mant = xm != nullptr;
    const std::int32_t* cur_m = xm;
    const double* cur_r = xr;
    // Fraction of the current mantissa representation. Entry mantissas are
    // in the first layer's input format.
    int cur_frac = 0;
    if (have_mant) {
        const QFormat& f0 = model_->layers.front().in_fmt;
        if (!f0.valid())
            throw std::invalid_argument("forward_q: first layer takes raw inputs");
        cur_frac = f0.frac_bits;
    }
    int cur_n = model_->input_dim;
    int flip = 0;

    for (std::size_t i = 0; i < plans_.size(); ++i) {
        const auto& p = plans_[i];
        const DenseLayer& l = *p.layer;
        const bool last = (i + 1 == plans_.size());

        if (!p.real_path) {
            // Need mantissas in l.in_fmt.
            if (!have_mant) {
                std::int32_t* scratch = ibuf_[flip].data();
                for (int c = 0; c < cur_n; ++c)
                    scratch[c] = static_cast<std::int32_t>(quantize(cur_r[c], l.in_fmt).mantissa);
                cur_m = scratch;
            }
            std::int32_t* dst = ibuf_[1 - flip].data();
            for (int r = 0; r < l.out_dim; ++r) {
                const std::int32_t* wrow = p.wm + std::size_t(r) * l.in_dim;
                std::int32_t acc = p.row_fast[r]
                                       ? detail::dot_row_exact(wrow, cur_m, l.in_dim,
                                                               p.bias_aligned[r])
                                       : detail::dot_row_saturating(wrow, cur_m, l.in_dim,
                                                                    p.bias_aligned[r]);
                std::int64_t a = acc;
                if (p.relu && a < 0) a = 0;
                dst[r] = static_cast<std::int32_t>(requantize(a, p.src_frac, p.out_fmt).mantissa);
            }
            if (last) {
                if (out_m) {
                    for (int r = 0; r < l.out_dim; ++r) out_m[r] = dst[r];
                } else {
                    const double s = std::ldexp(1.0, -p.out_fmt.frac_bits);
                    for (int r = 0; r < l.out_dim; ++r) out[r] = dst[r] * s;
                }
                return;
            }
            cur_m = dst;
            cur_frac = p.out_fmt.frac_bits;
            have_mant = true;
        } else {
            // Real path: inputs as doubles; mantissas convert exactly.
            if (have_mant) {
                double* scratch = rbuf_[flip].data();
                const double s = std::ldexp(1.0, -cur_frac);
                for (int c = 0; c < cur_n; ++c) scratch[c] = cur_m[c] * s;
                cur_r = scratch;
            }
            const double* wsrc = p.wr;
            const float* wfsrc = p.wr ? nullptr : l.wf.data();
            double* dst = rbuf_[1 - flip].data();
            for (int r = 0; r < l.out_dim; ++r) {
                double acc = p.br ? p.br[r] : double(l.bf[r]);
                if (wsrc) {
                    const double* wrow = wsrc + std::size_t(r) * l.in_dim;
                    for (int c = 0; c < l.in_dim; ++c) acc += wrow[c] * cur_r[c];
                } else {
                    const float* wrow = wfsrc + std::size_t(r) * l.in_dim;
                    for (int c = 0; c < l.in_dim; ++c) acc += double(wrow[c]) * cur_r[c];
                }
                if (p.relu && acc < 0) acc = 0;
                dst[r] = acc;
            }
            if (last) {
                if (out_m)
                    throw std::invalid_argument("forward: output layer is not quantized");
                for (int r = 0; r < l.out_dim; ++r) out[r] = dst[r];
                return;
            }
            if (p.quantize_out) {
                std::int32_t* mdst = ibuf_[1 - flip].data();
                for (int r = 0; r < l.out_dim; ++r)
                    mdst[r] = static_cast<std::int32_t>(quantize(dst[r], p.out_fmt).mantissa);
                cur_m = mdst;
                cur_frac = p.out_fmt.frac_bits;
                have_mant = true;
            } else {
                cur_r = dst;
                have_mant = false;
            }
        }
        cur_n = l.out_dim;
        flip = 1 - flip;
    }
}

// ---------------------------------------------------------------------------
// Public forward / predict wrappers.

inline std::vector<double> model_forward_real(const Model& m, const std::vector<double>& input) {
    if (std::ssize(input) != m.input_dim)
        throw std::invalid_argument("model_forward: input length mismatch");
    Evaluator ev(m);
    std::vector<double> out(m.num_classes);
    if (ev.first_layer_real()) {
        ev.forward_r(input.data(), out.data());
    } else {
        std::vector<std::int32_t> xm(input.size());
        const QFormat f = m.layers.front().in_fmt;
        for (std::size_t c = 0; c < input.size(); ++c)
            xm[c] = static_cast<std::int32_t>(quantize(input[c], f).mantissa);
        ev.forward_q(xm.data(), out.data());
    }
    return out;
}

inline std::vector<Fixed> model_forward(const Model& m, const std::vector<Fixed>& input) {
    if (std::ssize(input) != m.input_dim)
        throw std::invalid_argument("model_forward: input length mismatch");
    if (m.layers.back().float_storage)
        throw std::invalid_argument("model_forward: float output layer, use model_forward_real");
    std::vector<double> in(input.size());
    for (std::size_t c = 0; c < input.size(); ++c) in[c] = input[c].value();
    std::vector<double> out = model_forward_real(m, in);
    const QFormat f = m.layers.back().act_fmt;
    std::vector<Fixed> res(out.size());
    for (std::size_t r = 0; r < out.size(); ++r) res[r] = quantize(out[r], f);
    return res;
}

inline int argmax_lowest_tie(const double* v, int n) {
    int best = 0;
    for (int r = 1; r < n; ++r)
        if (v[r] > v[best]) best = r;
    return best;
}

inline int predict(const Model& m, const std::vector<double>& input) {
    std::vector<double> out = model_forward_real(m, input);
    return argmax_lowest_tie(out.data(), int(out.size()));
}

// ---------------------------------------------------------------------------
// Perturbation view: theta = omega + sigma * epsilon on masked entries of
// one layer, everything else shared with the base model.

namespace detail {
// Exact power of two (frexp mantissa 0.5), exponent out.
inline bool exact_po2(double x, int* exp_out) {
    if (x <= 0.0 || !std::isfinite(x)) return false;
    int e = 0;
    if (std::frexp(x, &e) != 0.5) return false;
    *exp_out = e - 1;
    return true;
}

// sigma * eps in the epsilon format: by shift when sigma is a power of
// two, otherwise by scalar multiply and requantization.
inline std::int64_t scale_noise_mantissa(std::int64_t eps_m, const QFormat& fmt, double sigma) {
    int e = 0;
    if (detail::exact_po2(sigma, &e))
        return shift_mul(Fixed{eps_m, fmt}, Po2{1, e}).mantissa;
    return quantize(std::ldexp(double(eps_m), -fmt.frac_bits) * sigma, fmt).mantissa;
}

// slot += sigma * eps, re-expressed in the weight grid, saturating.
inline void perturb_slot(std::int32_t& slot, std::int64_t eps_m, const QFormat& eps_fmt,
                         double sigma, const QFormat& weight_fmt) {
    const std::int64_t se = scale_noise_mantissa(eps_m, eps_fmt, sigma);
    const std::int64_t d = requantize(se, eps_fmt.frac_bits, weight_fmt).mantissa;
    slot = static_cast<std::int32_t>(saturate_mantissa(std::int64_t{slot} + d, weight_fmt));
}
}  // namespace detail

struct PerturbedModel {
    const Model* base = nullptr;
    int layer_index = 0;
    // Materialized layer, matching the base layer's storage kind.
    std::vector<std::int32_t> w, b;
    std::vector<double> wr, br;
};

inline PerturbedModel apply_perturbation(const Model& m, const WeightMask& mask,
                                         const std::vector<Fixed>& epsilon, double sigma) {
    mask.validate(m);
    if (epsilon.size() != mask.count(m))
        throw std::invalid_argument("apply_perturbation: epsilon length != mask count");
    const auto& l = m.layers[mask.layer_index];
    if (l.float_storage)
        throw std::invalid_argument("apply_perturbation: fixed-point layers only");

    PerturbedModel pv;
    pv.base = &m;
    pv.layer_index = mask.layer_index;
    pv.w = l.w;
    pv.b = l.b;

    const std::size_t nw = l.weight_count();
    std::size_t k = 0;
    auto bump = [&](std::size_t flat) {
        const Fixed& e = epsilon[k++];
        std::int32_t& slot = flat < nw ? pv.w[flat] : pv.b[flat - nw];
        detail::perturb_slot(slot, e.mantissa, e.fmt, sigma, l.weight_fmt);
    };
    if (mask.all) {
        for (std::size_t f = 0; f < l.param_count(); ++f) bump(f);
    } else {
        for (auto ix : mask.indices) bump(ix);
    }
    return pv;
}

inline std::vector<Fixed> model_forward(const PerturbedModel& pv, const std::vector<Fixed>& input) {
    const Model& m = *pv.base;
    if (m.layers.back().float_storage)
        throw std::invalid_argument("model_forward: float output layer");
    Evaluator ev(m);
    ev.override_quant(pv.layer_index, pv.w, pv.b);
    std::vector<std::int32_t> xm(input.size());
    const QFormat f = m.layers.front().in_fmt;
    for (std::size_t c = 0; c < input.size(); ++c)
        xm[c] = static_cast<std::int32_t>(quantize(input[c].value(), f).mantissa);
    std::vector<double> out(m.num_classes);
    ev.forward_q(xm.data(), out.data());
    const QFormat of = m.layers.back().act_fmt;
    std::vector<Fixed> res(out.size());
    for (std::size_t r = 0; r < out.size(); ++r) res[r] = quantize(out[r], of);
    return res;
}

// Re-hold one quantized layer's weights in a finer format, folding the
// power-of-two scale into the stored values. Training promotes the masked
// layer this way so perturbations and updates are representable.
inline void promote_layer_format(Model& m, int layer, const QFormat& fmt) {
    require_valid(fmt);
    auto& l = m.layers.at(layer);
    if (l.float_storage) throw std::invalid_argument("promote: layer already float");
    const int from_frac = l.weight_fmt.frac_bits - l.scale_exp;
    for (auto& v : l.w) v = static_cast<std::int32_t>(requantize(v, from_frac, fmt).mantissa);
    for (auto& v : l.b) v = static_cast<std::int32_t>(requantize(v, from_frac, fmt).mantissa);
    l.weight_fmt = fmt;
    l.scale_exp = 0;
}

// Convert one quantized layer to float32 storage (reference path).
inline void promote_layer_float(Model& m, int layer) {
    auto& l = m.layers.at(layer);
    if (l.float_storage) return;
    l.wf.resize(l.weight_count());
    l.bf.resize(l.out_dim);
    for (std::size_t i = 0; i < l.w.size(); ++i)
        l.wf[i] = float(std::ldexp(double(l.w[i]), l.scale_exp - l.weight_fmt.frac_bits));
    for (std::size_t i = 0; i < l.b.size(); ++i)
        l.bf[i] = float(std::ldexp(double(l.b[i]), l.scale_exp - l.weight_fmt.frac_bits));
    l.w.clear();
    l.b.clear();
    l.float_storage = true;
    l.scale_exp = 0;
}

}  // namespace estrain
