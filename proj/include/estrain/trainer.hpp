#pragma once

// Forward-pass-only incremental training of a masked weight subset.
//
// Each iteration draws a population of N perturbed weight vectors
// theta_i = omega + sigma * eps_i, scores every member with the negative
// mean-absolute-error reward over the whole training set, estimates
//
//     g = (1 / (N sigma)) * sum_i eps_i * loss_i
//
// and ascends omega <- omega + alpha * g. No gradients are ever
// backpropagated; the only model access is the forward pass.
//
// Two numeric paths exist. The float32 reference path keeps the trained
// layer's weights in floating point. The fixed-point path holds them in a
// configurable Q-format, draws quantized noise, accumulates eps_i * loss_i
// in 32-bit saturating accumulators (optionally with the loss snapped to a
// power of two so every multiply is a shift), and folds the 1/(N sigma)
// factor into the learning-rate scale.
//
// Population members are evaluated by a worker pool; results are reduced
// in a fixed index order, so the trajectory is bit-identical for any
// worker count. Training can be suspended between iterations and resumed
// from a serialized state blob without perturbing the trajectory, because
// the noise at iteration t is a pure function of (seed, t, i, j).

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include "estrain/checkpoint.hpp"
#include "estrain/dataset.hpp"
#include "estrain/network.hpp"
#include "estrain/noise.hpp"
#include "estrain/serial.hpp"

namespace estrain {

enum class PrecisionMode : std::uint8_t { float32_ref = 0, fixed_point = 1 };

struct Precision {
    PrecisionMode mode = PrecisionMode::float32_ref;
    QFormat fmt{};  // update/noise format of the fixed path

    static Precision float_ref() { return {PrecisionMode::float32_ref, {}}; }
    static Precision fixed(const QFormat& f) {
        require_valid(f);
        return {PrecisionMode::fixed_point, f};
    }
    bool is_fixed() const { return mode == PrecisionMode::fixed_point; }
};

enum class LossQuant : std::uint8_t { exact = 0, po2 = 1 };

struct TrainConfig {
    int population = 100;  // N
    int iterations = 100;  // k
    double sigma = 0.05;
    double alpha = 0.01;
    std::uint64_t seed = 1;
    WeightMask mask;
    Precision precision = Precision::float_ref();
    LossQuant loss_quant = LossQuant::exact;
    int workers = 1;

    void validate() const {
        if (population < 1) throw std::invalid_argument("config: population must be >= 1");
        if (iterations < 1) throw std::invalid_argument("config: iterations must be >= 1");
        if (!(sigma > 0)) throw std::invalid_argument("config: sigma must be > 0");
        if (!(alpha > 0)) throw std::invalid_argument("config: alpha must be > 0");
        if (workers < 1) throw std::invalid_argument("config: workers must be >= 1");
        if (precision.is_fixed()) {
            require_valid(precision.fmt);
            if (!precision.fmt.is_signed)
                throw std::invalid_argument("config: fixed precision format must be signed");
            if (loss_quant == LossQuant::po2) {
                int e = 0;
                if (!detail::exact_po2(alpha, &e))
                    throw std::invalid_argument(
                        "config: alpha must be a power of two for the shift-only path");
            }
        }
    }
};

struct IterationStats {
    double mean_loss = 0;
    std::uint64_t forward_passes = 0;  // cumulative
};

// Noise override used by tests (forced zero noise, antithetic pairs).
// Arguments: iteration t, member i, element j.
using NoiseFn = std::function<double(int, int, std::size_t)>;

// ---------------------------------------------------------------------------
// Loss and estimator primitives.

// Reward: -(1/C) sum_c |out[c] - onehot(target)[c]|. Higher is better.
inline double neg_mae_loss(const std::vector<double>& outputs, int target_class,
                           int num_classes) {
    if (std::ssize(outputs) != num_classes)
        throw std::invalid_argument("neg_mae_loss: output length != num_classes");
    if (target_class < 0 || target_class >= num_classes)
        throw std::out_of_range("neg_mae_loss: class index out of range");
    double sum = 0;
    for (int c = 0; c < num_classes; ++c)
        sum += std::fabs(outputs[c] - (c == target_class ? 1.0 : 0.0));
    return -sum / num_classes;
}

// Reference-path estimator, exactly (1/(N sigma)) sum_i eps_i * loss_i
// reduced in index order.
inline std::vector<double> estimate_gradient(const std::vector<std::vector<double>>& epsilons,
                                             const std::vector<double>& losses, double sigma) {
    if (epsilons.size() != losses.size() || epsilons.empty())
        throw std::invalid_argument("estimate_gradient: N epsilons and N losses required");
    const std::size_t w = epsilons.front().size();
    std::vector<double> g(w, 0.0);
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (epsilons[i].size() != w)
            throw std::invalid_argument("estimate_gradient: ragged epsilon");
        for (std::size_t j = 0; j < w; ++j) g[j] += epsilons[i][j] * losses[i];
    }
    const double scale = 1.0 / (double(epsilons.size()) * sigma);
    for (auto& v : g) v *= scale;
    return g;
}

inline std::vector<double> update_weights(const std::vector<double>& omega,
                                          const std::vector<double>& g_tilde, double alpha) {
    if (omega.size() != g_tilde.size())
        throw std::invalid_argument("update_weights: shape mismatch");
    std::vector<double> out(omega.size());
    for (std::size_t j = 0; j < omega.size(); ++j) out[j] = omega[j] + alpha * g_tilde[j];
    return out;
}

// Fixed-path accumulation of one member's contribution: eps_i * loss_i
// added to the gradient accumulators. With po2 loss quantization the
// multiply is a shift of the noise mantissa.
inline void accumulate_gradient_fixed(std::vector<Accumulator>& acc,
                                      const std::int32_t* eps_m, const QFormat& fmt,
                                      double loss, LossQuant lq) {
    if (lq == LossQuant::po2) {
        const Po2 p = po2_quantize(loss);
        for (auto& a : acc) {
            const std::int64_t term = shift_mul(Fixed{*eps_m++, fmt}, p).mantissa;
            a.value = saturating_add32(a.value, term);
        }
    } else {
        for (auto& a : acc) {
            const std::int64_t term = std::llround(double(*eps_m++) * loss);
            a.value = saturating_add32(a.value, term);
        }
    }
}

// Fixed-path weight step: omega_m += alpha_eff * acc, saturating in the
// weight format. alpha_eff carries the folded 1/(N sigma); on the
// shift-only path it is a power of two.
inline std::int32_t update_weight_fixed(std::int32_t omega_m, const Accumulator& acc,
                                        double alpha_eff, const Po2* alpha_po2,
                                        const QFormat& fmt) {
    std::int64_t delta;
    if (alpha_po2)
        delta = shift_mul(Fixed{acc.value, fmt}, *alpha_po2).mantissa;
    else
        delta = std::llround(alpha_eff * double(acc.value));
    return static_cast<std::int32_t>(saturate_mantissa(std::int64_t{omega_m} + delta, fmt));
}

// ---------------------------------------------------------------------------
// Trainer state blob.

struct StateError : std::runtime_error {
    enum class Kind { malformed, version, checksum, mismatch };
    Kind kind;
    StateError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

namespace detail {
inline constexpr char state_magic[8] = {'E', 'S', 'T', 'R', 'S', 'T', 'A', 'T'};
inline constexpr std::uint32_t state_version = 1;
}  // namespace detail

class Trainer;

struct TrainResult {
    Model model;
    std::vector<IterationStats> history;
    std::uint64_t forward_passes = 0;
};

// ---------------------------------------------------------------------------

class Trainer {
public:
    Trainer(const Model& base, const Dataset& data, TrainConfig cfg, NoiseFn noise = {})
        : cfg_(std::move(cfg)), data_(&data), noise_(std::move(noise)) {
        cfg_.validate();
        base.validate();
        data.validate();
        cfg_.mask.validate(base);
        if (data.dim != base.input_dim)
            throw std::invalid_argument("trainer: dataset dimension mismatch");
        const auto base_bytes = serialize_model(base);
        base_signature_ = serial::fnv1a(base_bytes.data(), base_bytes.size());
        model_ = base;
        const int L = cfg_.mask.layer_index;
        if (model_.layers[L].float_storage && cfg_.precision.is_fixed())
            throw std::invalid_argument("trainer: fixed path needs a quantized layer");
        if (cfg_.precision.is_fixed())
            promote_layer_format(model_, L, cfg_.precision.fmt);
        else if (!model_.layers[L].float_storage)
            promote_layer_float(model_, L);
        mask_count_ = cfg_.mask.count(model_);
        if (cfg_.precision.is_fixed() && cfg_.loss_quant == LossQuant::po2) {
            alpha_eff_po2_ = po2_quantize(cfg_.alpha / (double(cfg_.population) * cfg_.sigma));
            have_alpha_po2_ = true;
        }
        inputs_.emplace(data, model_.layers.front().float_storage
                                  ? original_input_fmt(base)
                                  : model_.layers.front().in_fmt);
    }

    static Trainer resume(const std::vector<std::uint8_t>& blob, const Model& base,
                          const Dataset& data);

    int t() const { return t_; }
    bool done() const { return t_ >= cfg_.iterations; }
    const TrainConfig& config() const { return cfg_; }
    const std::vector<IterationStats>& history() const { return history_; }
    std::uint64_t forward_passes() const { return fwd_passes_; }
    const Model& current_model() const { return model_; }
    void set_workers(int w) {
        if (w < 1) throw std::invalid_argument("workers must be >= 1");
        cfg_.workers = w;
    }

    // One full iteration: sample, evaluate, estimate, update.
    void step() {
        if (done()) throw std::logic_error("trainer: already finished");
        std::vector<double> losses = eval_population(t_);
        reduce_and_update(losses);
        double mean = 0;
        for (double l : losses) mean += l;
        mean /= double(losses.size());
        history_.push_back({mean, fwd_passes_});
        ++t_;
    }

    void run() {
        while (!done()) step();
    }

    TrainResult result() const { return {model_, history_, fwd_passes_}; }

    std::vector<std::uint8_t> suspend() const;

    // Population losses at iteration t. Also fills the epsilon store used
    // by the reduction.
    std::vector<double> eval_population(int t);

private:
    static QFormat original_input_fmt(const Model& base) {
        const auto& l0 = base.layers.front();
        if (!l0.float_storage) return l0.in_fmt;
        throw std::invalid_argument("trainer: float input layer has no input format");
    }

    double noise_at(int t, int i, std::size_t j) const {
        return noise_ ? noise_(t, i, j) : normal(cfg_.seed, std::uint64_t(t), std::uint64_t(i), j);
    }

    void materialize_member_fixed(const DenseLayer& l, const std::int32_t* eps_m,
                                  std::vector<std::int32_t>& w,
                                  std::vector<std::int32_t>& b) const {
        w = l.w;
        b = l.b;
        const std::size_t nw = l.weight_count();
        std::size_t k = 0;
        auto bump = [&](std::size_t flat) {
            std::int32_t& slot = flat < nw ? w[flat] : b[flat - nw];
            detail::perturb_slot(slot, eps_m[k++], cfg_.precision.fmt, cfg_.sigma,
                                 l.weight_fmt);
        };
        if (cfg_.mask.all)
            for (std::size_t f = 0; f < l.param_count(); ++f) bump(f);
        else
            for (auto ix : cfg_.mask.indices) bump(ix);
    }

    void materialize_member_real(const DenseLayer& l, const double* eps,
                                 std::vector<double>& w, std::vector<double>& b) const {
        const std::size_t nw = l.weight_count();
        w.resize(nw);
        b.resize(l.out_dim);
        for (std::size_t idx = 0; idx < nw; ++idx) w[idx] = l.wf[idx];
        for (int idx = 0; idx < l.out_dim; ++idx) b[idx] = l.bf[idx];
        std::size_t k = 0;
        auto bump = [&](std::size_t flat) {
            double& slot = flat < nw ? w[flat] : b[flat - nw];
            slot += cfg_.sigma * eps[k++];
        };
        if (cfg_.mask.all)
            for (std::size_t f = 0; f < l.param_count(); ++f) bump(f);
        else
            for (auto ix : cfg_.mask.indices) bump(ix);
    }

    double member_loss(Evaluator& ev) const {
        const Dataset& d = *data_;
        const int C = model_.num_classes;
        const bool first_real = model_.layers.front().float_storage;
        const bool last_quant = !model_.layers.back().float_storage;
        if (last_quant) {
            // Hardware loss accumulator: sum of |out - onehot| mantissas in
            // a 32-bit saturating register.
            const QFormat of = model_.layers.back().act_fmt;
            const std::int32_t one = std::int32_t(std::int64_t{1} << of.frac_bits);
            Accumulator acc{0, of.frac_bits};
            std::vector<std::int32_t> outm(C);
            for (std::size_t s = 0; s < d.size(); ++s) {
                if (first_real)
                    ev.forward_r_mantissas(inputs_->sample_r(s), outm.data());
                else
                    ev.forward_q_mantissas(inputs_->sample_m(s), outm.data());
                const int y = d.labels[s];
                for (int c = 0; c < C; ++c) {
                    const std::int64_t diff =
                        std::int64_t{outm[c]} - (c == y ? one : 0);
                    acc.value = saturating_add32(acc.value, diff < 0 ? -diff : diff);
                }
            }
            return -std::ldexp(double(acc.value), -of.frac_bits) /
                   (double(d.size()) * C);
        }
        std::vector<double> out(C);
        double sum = 0;
        for (std::size_t s = 0; s < d.size(); ++s) {
            if (first_real)
                ev.forward_r(inputs_->sample_r(s), out.data());
            else
                ev.forward_q(inputs_->sample_m(s), out.data());
            const int y = d.labels[s];
            for (int c = 0; c < C; ++c)
                sum += std::fabs(out[c] - (c == y ? 1.0 : 0.0));
        }
        return -sum / (double(d.size()) * C);
    }

    void reduce_and_update(const std::vector<double>& losses);

    TrainConfig cfg_;
    const Dataset* data_;
    NoiseFn noise_;
    Model model_;
    std::uint64_t base_signature_ = 0;
    std::size_t mask_count_ = 0;
    std::optional<QuantizedInputs> inputs_;
    Po2 alpha_eff_po2_{};
    bool have_alpha_po2_ = false;

    int t_ = 0;
    std::uint64_t fwd_passes_ = 0;
    std::vector<IterationStats> history_;

    // Per-iteration epsilon store, one row per member.
    std::vector<std::int32_t> eps_m_;  // fixed path, N x W
    std::vector<double> eps_r_;        // reference path, N x W
};

inline std::vector<double> Trainer::eval_population(int t) {
    const int N = cfg_.population;
    const std::size_t W = mask_count_;
    const bool fixed = cfg_.precision.is_fixed();
    const int L = cfg_.mask.layer_index;
    const DenseLayer& layer = model_.layers[L];

    if (fixed)
        eps_m_.resize(std::size_t(N) * W);
    else
        eps_r_.resize(std::size_t(N) * W);

    std::vector<double> losses(N, 0.0);
    std::atomic<std::uint64_t> passes{0};
    std::exception_ptr fail;
    std::mutex fail_mu;

    auto work = [&](int worker) {
        try {
            Evaluator ev(model_);
            std::vector<std::int32_t> wq, bq;
            std::vector<double> wr, br;
            for (int i = worker; i < N; i += cfg_.workers) {
                if (fixed) {
                    std::int32_t* row = eps_m_.data() + std::size_t(i) * W;
                    for (std::size_t j = 0; j < W; ++j)
                        row[j] = std::int32_t(
                            quantize(noise_at(t, i, j), cfg_.precision.fmt).mantissa);
                    materialize_member_fixed(layer, row, wq, bq);
                    ev.override_quant(L, wq, bq);
                } else {
                    double* row = eps_r_.data() + std::size_t(i) * W;
                    for (std::size_t j = 0; j < W; ++j) row[j] = noise_at(t, i, j);
                    materialize_member_real(layer, row, wr, br);
                    ev.override_real(L, wr, br);
                }
                losses[i] = member_loss(ev);
                passes.fetch_add(data_->size(), std::memory_order_relaxed);
            }
        } catch (...) {
            std::lock_guard<std::mutex> g(fail_mu);
            if (!fail) fail = std::current_exception();
        }
    };

    if (cfg_.workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(cfg_.workers);
        for (int w = 0; w < cfg_.workers; ++w) pool.emplace_back(work, w);
        for (auto& th : pool) th.join();
    }
    if (fail) std::rethrow_exception(fail);
    fwd_passes_ += passes.load();
    return losses;
}

inline void Trainer::reduce_and_update(const std::vector<double>& losses) {
    const int N = cfg_.population;
    const std::size_t W = mask_count_;
    const int L = cfg_.mask.layer_index;
    DenseLayer& layer = model_.layers[L];
    const std::size_t nw = layer.weight_count();

    if (cfg_.precision.is_fixed()) {
        std::vector<Accumulator> acc(W, Accumulator{0, cfg_.precision.fmt.frac_bits});
        for (int i = 0; i < N; ++i)
            accumulate_gradient_fixed(acc, eps_m_.data() + std::size_t(i) * W,
                                      cfg_.precision.fmt, losses[i], cfg_.loss_quant);
        const double alpha_eff = cfg_.alpha / (double(N) * cfg_.sigma);
        std::size_t k = 0;
        auto bump = [&](std::size_t flat) {
            std::int32_t& slot = flat < nw ? layer.w[flat] : layer.b[flat - nw];
            slot = update_weight_fixed(slot, acc[k], alpha_eff,
                                       have_alpha_po2_ ? &alpha_eff_po2_ : nullptr,
                                       layer.weight_fmt);
            ++k;
        };
        if (cfg_.mask.all)
            for (std::size_t f = 0; f < layer.param_count(); ++f) bump(f);
        else
            for (auto ix : cfg_.mask.indices) bump(ix);
        return;
    }

    // Reference path: Eq. 2 then Eq. 3, reduced in index order.
    std::vector<double> g(W, 0.0);
    for (int i = 0; i < N; ++i) {
        const double* row = eps_r_.data() + std::size_t(i) * W;
        for (std::size_t j = 0; j < W; ++j) g[j] += row[j] * losses[i];
    }
    const double inv_nsigma = 1.0 / (double(N) * cfg_.sigma);
    for (auto& v : g) v *= inv_nsigma;
    std::size_t k = 0;
    auto bump = [&](std::size_t flat) {
        float& slot = flat < nw ? layer.wf[flat] : layer.bf[flat - nw];
        slot = float(double(slot) + cfg_.alpha * g[k++]);
    };
    if (cfg_.mask.all)
        for (std::size_t f = 0; f < layer.param_count(); ++f) bump(f);
    else
        for (auto ix : cfg_.mask.indices) bump(ix);
}

// ---------------------------------------------------------------------------
// Suspend / resume. The iteration is the atomic unit; the blob captures
// everything the next iteration depends on.

inline std::vector<std::uint8_t> Trainer::suspend() const {
    serial::Writer w;
    w.bytes(detail::state_magic, 8);
    w.u32(detail::state_version);
    w.u64(base_signature_);
    w.u32(std::uint32_t(cfg_.population));
    w.u32(std::uint32_t(cfg_.iterations));
    w.f64(cfg_.sigma);
    w.f64(cfg_.alpha);
    w.u64(cfg_.seed);
    w.i32(cfg_.mask.layer_index);
    w.u8(cfg_.mask.all ? 1 : 0);
    w.u32(std::uint32_t(cfg_.mask.indices.size()));
    for (auto ix : cfg_.mask.indices) w.u32(ix);
    w.u8(std::uint8_t(cfg_.precision.mode));
    w.u8(std::uint8_t(cfg_.precision.fmt.total_bits));
    w.u8(std::uint8_t(cfg_.precision.fmt.frac_bits));
    w.u8(cfg_.precision.fmt.is_signed ? 1 : 0);
    w.u8(std::uint8_t(cfg_.loss_quant));
    w.u32(std::uint32_t(cfg_.workers));
    w.u32(std::uint32_t(t_));
    w.u64(fwd_passes_);

    const DenseLayer& layer = model_.layers[cfg_.mask.layer_index];
    const std::size_t nw = layer.weight_count();
    w.u8(cfg_.precision.is_fixed() ? 0 : 1);
    w.u32(std::uint32_t(mask_count_));
    auto emit = [&](std::size_t flat) {
        if (cfg_.precision.is_fixed())
            w.i32(flat < nw ? layer.w[flat] : layer.b[flat - nw]);
        else
            w.f32(flat < nw ? layer.wf[flat] : layer.bf[flat - nw]);
    };
    if (cfg_.mask.all)
        for (std::size_t f = 0; f < layer.param_count(); ++f) emit(f);
    else
        for (auto ix : cfg_.mask.indices) emit(ix);

    w.u32(std::uint32_t(history_.size()));
    for (const auto& h : history_) {
        w.f64(h.mean_loss);
        w.u64(h.forward_passes);
    }
    w.finish_with_checksum();
    return w.buf;
}

inline Trainer Trainer::resume(const std::vector<std::uint8_t>& blob, const Model& base,
                               const Dataset& data) {
    using Kind = StateError::Kind;
    if (blob.size() < 8 + 4 + 8 || std::memcmp(blob.data(), detail::state_magic, 8) != 0)
        throw StateError(Kind::malformed, "state: bad magic");
    serial::Reader hdr(blob);
    hdr.pos = 8;
    if (hdr.u32() != detail::state_version)
        throw StateError(Kind::version, "state: unsupported version");
    const std::size_t body = blob.size() - 8;
    serial::Reader tail(blob);
    tail.pos = body;
    if (tail.u64() != serial::fnv1a(blob.data(), body))
        throw StateError(Kind::checksum, "state: checksum mismatch");

    try {
        serial::Reader r(blob);
        r.pos = 12;
        r.n = body;
        const std::uint64_t sig = r.u64();
        TrainConfig cfg;
        cfg.population = int(r.u32());
        cfg.iterations = int(r.u32());
        cfg.sigma = r.f64();
        cfg.alpha = r.f64();
        cfg.seed = r.u64();
        cfg.mask.layer_index = r.i32();
        cfg.mask.all = r.u8() != 0;
        cfg.mask.indices.resize(r.u32());
        for (auto& ix : cfg.mask.indices) ix = r.u32();
        cfg.precision.mode = PrecisionMode(r.u8());
        cfg.precision.fmt.total_bits = r.u8();
        cfg.precision.fmt.frac_bits = r.u8();
        cfg.precision.fmt.is_signed = r.u8() != 0;
        cfg.loss_quant = LossQuant(r.u8());
        cfg.workers = int(r.u32());
        const int t = int(r.u32());
        const std::uint64_t passes = r.u64();

        const bool omega_real = r.u8() != 0;
        const std::uint32_t count = r.u32();
        std::vector<std::int32_t> om(omega_real ? 0 : count);
        std::vector<float> of(omega_real ? count : 0);
        for (std::uint32_t i = 0; i < count; ++i) {
            if (omega_real)
                of[i] = r.f32();
            else
                om[i] = r.i32();
        }
        std::vector<IterationStats> hist(r.u32());
        for (auto& h : hist) {
            h.mean_loss = r.f64();
            h.forward_passes = r.u64();
        }
        if (r.pos != body) throw StateError(Kind::malformed, "state: trailing bytes");

        Trainer tr(base, data, cfg);
        if (tr.base_signature_ != sig)
            throw StateError(Kind::mismatch, "state: model does not match blob");
        if (count != tr.mask_count_ || omega_real == tr.cfg_.precision.is_fixed())
            throw StateError(Kind::mismatch, "state: mask shape does not match");
        if (t > cfg.iterations || hist.size() != std::size_t(t))
            throw StateError(Kind::malformed, "state: inconsistent progress");

        DenseLayer& layer = tr.model_.layers[cfg.mask.layer_index];
        const std::size_t nw = layer.weight_count();
        std::size_t k = 0;
        auto put = [&](std::size_t flat) {
            if (omega_real) {
                (flat < nw ? layer.wf[flat] : layer.bf[flat - nw]) = of[k++];
            } else {
                (flat < nw ? layer.w[flat] : layer.b[flat - nw]) = om[k++];
            }
        };
        if (cfg.mask.all)
            for (std::size_t f = 0; f < layer.param_count(); ++f) put(f);
        else
            for (auto ix : cfg.mask.indices) put(ix);

        tr.t_ = t;
        tr.fwd_passes_ = passes;
        tr.history_ = std::move(hist);
        return tr;
    } catch (const StateError&) {
        throw;
    } catch (const std::exception& e) {
        throw StateError(Kind::malformed, std::string("state: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Convenience wrappers.

inline TrainResult train(const Model& model, const Dataset& data, const TrainConfig& cfg,
                         NoiseFn noise = {}) {
    Trainer tr(model, data, cfg, std::move(noise));
    tr.run();
    return tr.result();
}

// Population losses at iteration t against an unmodified base model.
inline std::vector<double> evaluate_population(const Model& model, const WeightMask& mask,
                                               const Dataset& data, TrainConfig cfg, int t,
                                               NoiseFn noise = {}) {
    cfg.mask = mask;
    Trainer tr(model, data, std::move(cfg), std::move(noise));
    return tr.eval_population(t);
}

// Generic reference-path ES ascent over an arbitrary objective; shares the
// estimator and update rules with the model trainer.
template <typename Objective>
inline std::pair<std::vector<double>, std::vector<double>> es_optimize(
    Objective&& objective, std::vector<double> w0, int population, int iterations,
    double sigma, double alpha, std::uint64_t seed, NoiseFn noise = {}) {
    if (population < 1 || iterations < 1 || !(sigma > 0))
        throw std::invalid_argument("es_optimize: bad parameters");
    const std::size_t W = w0.size();
    std::vector<double> history;
    std::vector<std::vector<double>> eps(population, std::vector<double>(W));
    std::vector<double> losses(population);
    std::vector<double> theta(W);
    for (int t = 0; t < iterations; ++t) {
        double mean = 0;
        for (int i = 0; i < population; ++i) {
            for (std::size_t j = 0; j < W; ++j)
                eps[i][j] = noise ? noise(t, i, j)
                                  : normal(seed, std::uint64_t(t), std::uint64_t(i), j);
            for (std::size_t j = 0; j < W; ++j) theta[j] = w0[j] + sigma * eps[i][j];
            losses[i] = objective(theta);
            mean += losses[i];
        }
        history.push_back(mean / population);
        w0 = update_weights(w0, estimate_gradient(eps, losses, sigma), alpha);
    }
    return {std::move(w0), std::move(history)};
}

}  // namespace estrain
