#pragma once

// Analytical hardware model: training-time estimation for a forward-pass
// training datapath, per-block LUT/FF area and utilization against a
// Kintex UltraScale part, and a discrete-event model of the weight-update
// control logic interleaving inference with training on the shared
// datapath.
//
// With W weights to update and P implemented training blocks, one training
// iteration over one image costs (t_f + t_l + t_g + t_u) * (W/P) * N, and
// the full job costs t_f * (W/P) * M * N * k once the loss/gradient/update
// terms are negligible. W/P is carried as an exact rational; a ceiling
// variant is reported alongside for the case where P does not divide W.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace estrain::hw {

struct HwParams {
    double t_f = 1e-6;  // forward pass
    double t_l = 0;     // loss
    double t_g = 0;     // gradient accumulate
    double t_u = 0;     // weight update
    std::int64_t weights = 157000;       // W
    std::int64_t blocks = 1000;          // P
    std::int64_t images = 10000;         // M
    std::int64_t population = 100;       // N
    std::int64_t iterations = 100;       // k

    void validate() const {
        if (!(t_f > 0)) throw std::invalid_argument("hw: t_f must be > 0");
        if (t_l < 0 || t_g < 0 || t_u < 0)
            throw std::invalid_argument("hw: negative stage time");
        if (weights < 1 || blocks < 1 || images < 1 || population < 1 || iterations < 1)
            throw std::invalid_argument("hw: counts must be >= 1");
        if (blocks > weights) throw std::invalid_argument("hw: P must not exceed W");
    }
};

// Time for one training iteration over one image.
inline double iteration_time(const HwParams& p) {
    p.validate();
    const long double ratio = (long double)p.weights / (long double)p.blocks;
    return double((long double)(p.t_f + p.t_l + p.t_g + p.t_u) * ratio *
                  (long double)p.population);
}

inline double iteration_time_ceil(const HwParams& p) {
    p.validate();
    const long double ratio = (long double)((p.weights + p.blocks - 1) / p.blocks);
    return double((long double)(p.t_f + p.t_l + p.t_g + p.t_u) * ratio *
                  (long double)p.population);
}

// Forward passes per iteration per image: N * W / P.
inline double forward_passes_per_iteration_per_image(std::int64_t weights, std::int64_t blocks,
                                                     std::int64_t population) {
    if (weights < 1 || blocks < 1 || population < 1)
        throw std::invalid_argument("hw: counts must be >= 1");
    return double((long double)population * (long double)weights / (long double)blocks);
}

// Whole-job training time, forward passes dominating.
inline double total_training_time(const HwParams& p) {
    p.validate();
    const long double passes = (long double)p.weights / (long double)p.blocks *
                               (long double)p.images * (long double)p.population *
                               (long double)p.iterations;
    return double((long double)p.t_f * passes);
}

// ---------------------------------------------------------------------------
// Area model. Per-block costs and the loss accumulator are synthesis
// figures for the incremental-training micro-architecture; the part
// defaults are the Kintex UltraScale xcku035 resource counts.

inline constexpr std::int64_t block_lut = 91;
inline constexpr std::int64_t block_ff = 68;
inline constexpr std::int64_t loss_accumulator_lut = 9;
inline constexpr std::int64_t loss_accumulator_ff = 37;
inline constexpr std::int64_t default_lut_available = 203128;
inline constexpr std::int64_t default_ff_available = 406256;

struct AreaReport {
    std::int64_t lut = 0;
    std::int64_t ff = 0;
    double lut_pct = 0;
    double ff_pct = 0;
    std::int64_t lut_available = default_lut_available;
    std::int64_t ff_available = default_ff_available;
};

inline AreaReport area_overhead(std::int64_t blocks, bool include_loss_accumulator,
                                std::int64_t lut_available = default_lut_available,
                                std::int64_t ff_available = default_ff_available) {
    if (blocks < 1) throw std::invalid_argument("hw: P must be >= 1");
    if (lut_available < 1 || ff_available < 1)
        throw std::invalid_argument("hw: available resources must be >= 1");
    AreaReport r;
    r.lut = block_lut * blocks + (include_loss_accumulator ? loss_accumulator_lut : 0);
    r.ff = block_ff * blocks + (include_loss_accumulator ? loss_accumulator_ff : 0);
    r.lut_available = lut_available;
    r.ff_available = ff_available;
    r.lut_pct = 100.0 * double(r.lut) / double(lut_available);
    r.ff_pct = 100.0 * double(r.ff) / double(ff_available);
    return r;
}

// ---------------------------------------------------------------------------
// Inference/training interleave simulation. One forward pass is the atomic
// unit; training progress is tracked in exact 1/P sub-units so pausing
// never loses effort regardless of whether P divides W.

enum class SchedulePolicy { train_in_gaps, block_until_done };
enum class EventKind : std::uint8_t { inference, train_eval, train_update, pause, resume };

struct TraceEvent {
    EventKind kind;
    double start;
    double duration;
};

struct Trace {
    std::vector<TraceEvent> events;
    std::int64_t train_subunits = 0;  // total, in 1/P forward-pass units
    double training_completed_at = 0;
    double end_time = 0;
};

inline const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::inference: return "inference";
        case EventKind::train_eval: return "train_eval";
        case EventKind::train_update: return "train_update";
        case EventKind::pause: return "pause";
        case EventKind::resume: return "resume";
    }
    return "?";
}

inline Trace simulate_interleave(const std::vector<double>& arrivals, const HwParams& p,
                                 SchedulePolicy policy) {
    p.validate();
    for (std::size_t i = 0; i + 1 < arrivals.size(); ++i)
        if (arrivals[i] > arrivals[i + 1])
            throw std::invalid_argument("interleave: arrivals must be sorted");
    for (double a : arrivals)
        if (a < 0) throw std::invalid_argument("interleave: negative arrival");

    // Total work in 1/P sub-units; one atomic pass consumes P of them.
    const std::int64_t total_sub = p.weights * p.images * p.population * p.iterations;
    std::int64_t rem_full = total_sub / p.blocks;
    bool rem_partial = (total_sub % p.blocks) != 0;
    const double partial_dur = p.t_f * (double(total_sub % p.blocks) / double(p.blocks));

    Trace tr;
    tr.train_subunits = total_sub;

    double t = 0;
    std::size_t next_arrival = 0;
    bool training_started = false;
    bool paused = false;

    auto emit = [&](EventKind k, double start, double dur) {
        tr.events.push_back({k, start, dur});
    };
    auto training_remaining = [&] { return rem_full > 0 || rem_partial; };
    // Run up to `n` atomic passes starting at time t as one merged event;
    // the fractional tail rides along once the full passes are exhausted.
    auto run_passes = [&](std::int64_t n) {
        double dur;
        bool finished = false;
        if (n >= rem_full) {
            n = rem_full;
            dur = double(n) * p.t_f + (rem_partial ? partial_dur : 0.0);
            finished = true;
        } else {
            dur = double(n) * p.t_f;
        }
        if (n == 0 && !(finished && rem_partial)) {
            if (finished) {
                rem_partial = false;
                tr.training_completed_at = t;
            }
            return;
        }
        if (paused) {
            emit(EventKind::resume, t, 0);
            paused = false;
        }
        emit(EventKind::train_eval, t, dur);
        t += dur;
        rem_full -= n;
        if (finished) {
            rem_partial = false;
            tr.training_completed_at = t;
        }
        training_started = true;
    };

    if (policy == SchedulePolicy::block_until_done) {
        run_passes(rem_full);
        for (; next_arrival < arrivals.size(); ++next_arrival) {
            const double s = std::max(t, arrivals[next_arrival]);
            emit(EventKind::inference, s, p.t_f);
            t = s + p.t_f;
        }
        tr.end_time = t;
        return tr;
    }

    // train_in_gaps: inference has priority; training fills the idle gaps
    // in atomic forward-pass units.
    while (training_remaining() || next_arrival < arrivals.size()) {
        if (next_arrival < arrivals.size() && arrivals[next_arrival] <= t) {
            if (training_started && training_remaining() && !paused) {
                emit(EventKind::pause, t, 0);
                paused = true;
            }
            const double s = std::max(t, arrivals[next_arrival]);
            emit(EventKind::inference, s, p.t_f);
            t = s + p.t_f;
            ++next_arrival;
            continue;
        }
        if (!training_remaining()) {
            // Idle until the next arrival.
            t = std::max(t, arrivals[next_arrival]);
            continue;
        }
        if (next_arrival >= arrivals.size()) {
            run_passes(rem_full);
            continue;
        }
        const double gap = arrivals[next_arrival] - t;
        if (gap <= 0) continue;
        // Passes may start strictly before the next arrival.
        const double n_exact = gap / p.t_f;
        std::int64_t n = std::int64_t(n_exact);
        if (double(n) < n_exact) ++n;  // a pass underway when the arrival lands
        run_passes(std::min(n, rem_full));
    }
    tr.end_time = t;
    return tr;
}

}  // namespace estrain::hw
