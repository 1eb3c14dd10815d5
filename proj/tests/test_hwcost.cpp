#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "estrain/hwcost.hpp"

using namespace estrain::hw;

TEST_CASE("iteration_time: collapse, headline value, linearity", "[hwcost]") {
    // t_l = t_g = t_u = 0 and W = P collapse to N forward passes.
    HwParams p{1e-6, 0, 0, 0, 500, 500, 1, 100, 1};
    CHECK(iteration_time(p) == Catch::Approx(1e-4).epsilon(1e-12));

    // 1us forward, W=157000, P=1000, N=100: 15.7 ms per iteration per image.
    HwParams paper{1e-6, 0, 0, 0, 157000, 1000, 10000, 100, 100};
    CHECK(iteration_time(paper) == Catch::Approx(0.0157).epsilon(1e-12));

    // Doubling P halves the time.
    HwParams half = paper;
    half.blocks = 2000;
    CHECK(iteration_time(half) == Catch::Approx(iteration_time(paper) / 2).epsilon(1e-12));

    // Ceiling variant differs only when P does not divide W.
    HwParams odd{1e-6, 0, 0, 0, 3, 2, 1, 1, 1};
    CHECK(iteration_time(odd) == Catch::Approx(1.5e-6).epsilon(1e-12));
    CHECK(iteration_time_ceil(odd) == Catch::Approx(2e-6).epsilon(1e-12));
}

TEST_CASE("total_training_time: 100-second headline is exact", "[hwcost]") {
    HwParams p{1e-6, 0, 0, 0, 157000, 157000, 10000, 100, 100};
    CHECK(total_training_time(p) == 100.0);

    // Invariants reject degenerate inputs.
    HwParams bad = p;
    bad.images = 0;
    CHECK_THROWS_AS(total_training_time(bad), std::invalid_argument);
    bad = p;
    bad.blocks = p.weights + 1;
    CHECK_THROWS_AS(total_training_time(bad), std::invalid_argument);
    bad = p;
    bad.t_f = 0;
    CHECK_THROWS_AS(total_training_time(bad), std::invalid_argument);
}

TEST_CASE("total equals iteration * M * k when extra stages are free", "[hwcost]") {
    HwParams p{1e-6, 0, 0, 0, 157000, 1000, 123, 100, 7};
    CHECK(total_training_time(p) ==
          Catch::Approx(iteration_time(p) * p.images * p.iterations).epsilon(1e-12));
}

TEST_CASE("forward-pass table: exact counts for the published sweep", "[hwcost]") {
    const std::int64_t ps[] = {1, 10, 100, 1000, 2000};
    const double want[] = {15700000, 1570000, 157000, 15700, 7850};
    for (int i = 0; i < 5; ++i)
        CHECK(forward_passes_per_iteration_per_image(157000, ps[i], 100) == want[i]);
}

TEST_CASE("area model: per-block and accumulator costs", "[hwcost]") {
    auto r = area_overhead(1, false);
    CHECK(r.lut == 91);
    CHECK(r.ff == 68);
    CHECK(r.lut_pct == Catch::Approx(100.0 * 91 / 203128).epsilon(1e-12));
    CHECK(r.ff_pct == Catch::Approx(100.0 * 68 / 406256).epsilon(1e-12));

    r = area_overhead(1, true);
    CHECK(r.lut == 100);
    CHECK(r.ff == 105);

    r = area_overhead(2000, false);
    CHECK(r.lut == 182000);
    CHECK(r.ff == 136000);

    CHECK_THROWS_AS(area_overhead(0, false), std::invalid_argument);
}

TEST_CASE("area sweep reproduces the published pairs", "[hwcost]") {
    const std::int64_t ps[] = {1, 10, 100, 1000, 2000};
    const std::int64_t lut[] = {91, 910, 9100, 91000, 182000};
    const std::int64_t ff[] = {68, 680, 6800, 68000, 136000};
    for (int i = 0; i < 5; ++i) {
        const auto r = area_overhead(ps[i], false);
        CHECK(r.lut == lut[i]);
        CHECK(r.ff == ff[i]);
    }
}

namespace {

double train_eval_total(const Trace& t) {
    double s = 0;
    for (const auto& e : t.events)
        if (e.kind == EventKind::train_eval) s += e.duration;
    return s;
}

void check_well_formed(const Trace& t) {
    double cursor = 0;
    for (const auto& e : t.events) {
        CHECK(e.start >= cursor - 1e-12);
        CHECK(e.duration >= 0);
        cursor = e.start + e.duration;
    }
}

}  // namespace

TEST_CASE("interleave: no arrivals, both policies take the whole-job time", "[hwcost]") {
    HwParams p{1.0, 0, 0, 0, 4, 2, 3, 1, 1};  // 6 passes of 1s
    for (auto policy : {SchedulePolicy::train_in_gaps, SchedulePolicy::block_until_done}) {
        const auto t = simulate_interleave({}, p, policy);
        CHECK(t.training_completed_at == total_training_time(p));
        CHECK(train_eval_total(t) == total_training_time(p));
        check_well_formed(t);
    }
}

TEST_CASE("interleave: fractional tail conserves training effort", "[hwcost]") {
    HwParams p{1.0, 0, 0, 0, 3, 2, 1, 1, 1};  // 1.5 passes
    const auto t = simulate_interleave({}, p, SchedulePolicy::train_in_gaps);
    CHECK(train_eval_total(t) == 1.5);
    CHECK(t.training_completed_at == 1.5);
}

TEST_CASE("interleave: gap policy starts every inference within one pass", "[hwcost]") {
    HwParams p{1.0, 0, 0, 0, 8, 1, 1, 1, 1};  // 8 passes
    const std::vector<double> arrivals = {0.5, 2.5, 7.0, 30.0};
    const auto t = simulate_interleave(arrivals, p, SchedulePolicy::train_in_gaps);
    check_well_formed(t);
    std::size_t seen = 0;
    for (const auto& e : t.events)
        if (e.kind == EventKind::inference) {
            CHECK(e.start - arrivals[seen] <= p.t_f + 1e-12);
            ++seen;
        }
    CHECK(seen == arrivals.size());
    CHECK(train_eval_total(t) == total_training_time(p));
}

TEST_CASE("interleave: block policy defers all inference", "[hwcost]") {
    HwParams p{1.0, 0, 0, 0, 5, 1, 1, 1, 1};
    const std::vector<double> arrivals = {0.0, 1.0, 2.0};
    const auto t = simulate_interleave(arrivals, p, SchedulePolicy::block_until_done);
    check_well_formed(t);
    for (const auto& e : t.events)
        if (e.kind == EventKind::inference) CHECK(e.start >= t.training_completed_at);
    CHECK(t.training_completed_at == 5.0);
}

TEST_CASE("interleave: 50% dense arrivals double the completion time", "[hwcost]") {
    // Arrivals every 2s, each serving 1s: training rate is halved exactly.
    HwParams p{1.0, 0, 0, 0, 10, 1, 1, 1, 1};  // 10 passes
    std::vector<double> arrivals;
    for (int i = 0; i < 40; ++i) arrivals.push_back(2.0 * i);
    const auto t = simulate_interleave(arrivals, p, SchedulePolicy::train_in_gaps);
    const double solo =
        simulate_interleave({}, p, SchedulePolicy::train_in_gaps).training_completed_at;
    CHECK(t.training_completed_at <= 2.0 * solo + p.t_f);
    CHECK(t.training_completed_at >= 2.0 * solo - p.t_f);
    CHECK(train_eval_total(t) == total_training_time(p));
    // Pause/resume markers bracket the interruptions.
    bool saw_pause = false, saw_resume = false;
    for (const auto& e : t.events) {
        if (e.kind == EventKind::pause) saw_pause = true;
        if (e.kind == EventKind::resume) saw_resume = true;
    }
    CHECK(saw_pause);
    CHECK(saw_resume);
}

TEST_CASE("interleave: unsorted or negative arrivals rejected", "[hwcost]") {
    HwParams p{1.0, 0, 0, 0, 4, 1, 1, 1, 1};
    CHECK_THROWS_AS(simulate_interleave({3.0, 1.0}, p, SchedulePolicy::train_in_gaps),
                    std::invalid_argument);
    CHECK_THROWS_AS(simulate_interleave({-1.0}, p, SchedulePolicy::train_in_gaps),
                    std::invalid_argument);
}
