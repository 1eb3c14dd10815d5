// Acceptance suite: runs every criterion at its stated tolerance and
// prints one pass/fail line per criterion. Exit code is the number of
// failed criteria. `--criterion N` (repeatable) selects a subset;
// `--workers N` sets the population worker count for the heavy runs.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "estrain/baseline.hpp"
#include "estrain/checkpoint.hpp"
#include "estrain/experiment.hpp"
#include "estrain/hwcost.hpp"
#include "estrain/noise.hpp"
#include "estrain/serial.hpp"
#include "estrain/trainer.hpp"

using namespace estrain;
namespace fs = std::filesystem;

namespace {

int g_workers = 1;

ExperimentConfig desk_config() {
    ExperimentConfig cfg;
    cfg.synthetic = true;
    cfg.classes = 10;
    cfg.dim = 64;
    cfg.synthetic_count = 6000;
    cfg.train_count = 4000;
    cfg.arch = {64, 32, 16, 10};
    cfg.weight_fmt = QFormat::sgn(4, 3);
    cfg.baseline_epochs = 30;
    cfg.baseline_lr = 0.05;
    cfg.train_layer = 0;
    cfg.population = 100;
    cfg.iterations = 100;
    cfg.es_sigma = 0.0625;
    cfg.es_alpha = 0.0078125;
    cfg.retrain_samples = 2000;
    cfg.seed = 1;
    cfg.replicates = 5;
    cfg.workers = g_workers;
    return cfg;
}

struct SigmaStats {
    double pre = 0, post = 0;
    int n = 0;
};

std::map<std::string, std::map<double, SigmaStats>> summarize(const ExperimentReport& r) {
    std::map<std::string, std::map<double, SigmaStats>> s;
    for (const auto& row : r.rows) {
        auto& e = s[row.precision][row.noise_sigma];
        e.pre += row.accuracy_before;
        e.post += row.accuracy_after;
        ++e.n;
    }
    for (auto& [p, by_sigma] : s)
        for (auto& [sig, e] : by_sigma) {
            e.pre /= e.n;
            e.post /= e.n;
        }
    return s;
}

// Results shared between criteria 5 and 6 (the sigma=0.5 float32 runs).
std::optional<ExperimentReport> g_c5_report;

// --- criteria ---------------------------------------------------------------

bool criterion1(std::string& detail) {
    hw::HwParams p{1e-6, 0, 0, 0, 157000, 157000, 10000, 100, 100};
    const double t = hw::total_training_time(p);
    detail = "total_training_time = " + std::to_string(t) + " s";
    return t == 100.0;
}

bool criterion2(std::string& detail) {
    const std::int64_t ps[] = {1, 10, 100, 1000, 2000};
    const double passes[] = {15700000, 1570000, 157000, 15700, 7850};
    const std::int64_t lut[] = {91, 910, 9100, 91000, 182000};
    const std::int64_t ff[] = {68, 680, 6800, 68000, 136000};
    for (int i = 0; i < 5; ++i) {
        if (hw::forward_passes_per_iteration_per_image(157000, ps[i], 100) != passes[i]) {
            detail = "forward-pass count mismatch at P=" + std::to_string(ps[i]);
            return false;
        }
        const auto a = hw::area_overhead(ps[i], false);
        if (a.lut != lut[i] || a.ff != ff[i]) {
            detail = "area mismatch at P=" + std::to_string(ps[i]);
            return false;
        }
    }
    detail = "all five rows exact";
    return true;
}

bool criterion3(std::string& detail) {
    // Published utilization values carry mixed printed precision; agreement
    // is within one unit of each printed last digit.
    const auto block = hw::area_overhead(1, false);
    const double acc_lut_pct = 100.0 * hw::loss_accumulator_lut / hw::default_lut_available;
    const double acc_ff_pct = 100.0 * hw::loss_accumulator_ff / hw::default_ff_available;
    struct Row {
        double got, printed, unit;
    } rows[] = {
        {block.lut_pct, 0.04, 0.01},
        {block.ff_pct, 0.017, 0.001},
        {acc_lut_pct, 0.01, 0.01},
        {acc_ff_pct, 0.01, 0.01},
    };
    char buf[160];
    std::snprintf(buf, sizeof(buf), "pct = %.4f / %.4f / %.4f / %.4f", rows[0].got,
                  rows[1].got, rows[2].got, rows[3].got);
    detail = buf;
    for (const auto& r : rows)
        if (std::fabs(r.got - r.printed) >= r.unit) return false;
    return true;
}

bool criterion4(std::string& detail) {
    // Reference estimator on f(w) = a . w, a = [3, -2].
    const std::vector<double> a = {3.0, -2.0};
    const std::vector<double> w0 = {0.2, -0.1};
    const double sigma = 0.1;
    const int N = 10000;
    std::vector<std::vector<double>> eps(N, std::vector<double>(2));
    std::vector<double> losses(N);
    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < 2; ++j) eps[i][j] = normal(4242, 0, i, j);
        losses[i] = a[0] * (w0[0] + sigma * eps[i][0]) + a[1] * (w0[1] + sigma * eps[i][1]);
    }
    const auto g = estimate_gradient(eps, losses, sigma);
    char buf[120];
    std::snprintf(buf, sizeof(buf), "g = [%.4f, %.4f]", g[0], g[1]);
    detail = buf;
    for (int j = 0; j < 2; ++j)
        if (std::fabs(g[j] - a[j]) / std::fabs(a[j]) > 0.05) return false;

    // Antithetic pairs on dyadic values: exact linear cancellation.
    const double s2 = 0.25, base = 0.5;
    for (int axis = 0; axis < 2; ++axis) {
        std::vector<double> e(2, 0.0);
        e[axis] = 1.0;
        auto f = [&](double sign) {
            double v = 0;
            for (int j = 0; j < 2; ++j) v += a[j] * (base + sign * s2 * e[j]);
            return v;
        };
        const auto gp = estimate_gradient({e, {-e[0], -e[1]}}, {f(+1), f(-1)}, s2);
        if (gp[axis] != a[axis]) {
            detail += "; antithetic mismatch";
            return false;
        }
    }
    return true;
}

bool criterion5(std::string& detail) {
    ExperimentConfig cfg = desk_config();
    cfg.sigma_grid = {0.25, 0.5};
    cfg.precisions = {precision_float32()};
    const auto report = run_recovery_experiment(cfg);
    g_c5_report = report;

    // Forward-pass accounting on every run (ties into criterion 10).
    for (const auto& row : report.rows) {
        const std::uint64_t want =
            std::uint64_t(row.retrain_samples) * cfg.population * cfg.iterations;
        if (row.forward_passes != want) {
            detail = "forward-pass count mismatch";
            return false;
        }
    }

    const auto s = summarize(report);
    const auto& f32 = s.at("float32");
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "sigma 0.25: %.3f -> %.3f; sigma 0.5: %.3f -> %.3f (5-seed means)",
                  f32.at(0.25).pre, f32.at(0.25).post, f32.at(0.5).pre, f32.at(0.5).post);
    detail = buf;
    if (!(f32.at(0.25).post > f32.at(0.25).pre)) return false;
    if (!(f32.at(0.5).post > f32.at(0.5).pre)) return false;
    if (!(f32.at(0.5).post - f32.at(0.5).pre >= 0.05)) return false;
    return true;
}

bool criterion6(std::string& detail) {
    ExperimentConfig cfg = desk_config();
    cfg.sigma_grid = {0.5};
    cfg.precisions = {precision_fixed(12, 8, LossQuant::po2)};
    const auto fixed_report = run_recovery_experiment(cfg);

    double f32_post = 0;
    int n32 = 0;
    if (g_c5_report) {
        for (const auto& row : g_c5_report->rows)
            if (row.noise_sigma == 0.5 && row.precision == "float32") {
                f32_post += row.accuracy_after;
                ++n32;
            }
    } else {
        ExperimentConfig ref = desk_config();
        ref.sigma_grid = {0.5};
        ref.precisions = {precision_float32()};
        const auto ref_report = run_recovery_experiment(ref);
        for (const auto& row : ref_report.rows) {
            f32_post += row.accuracy_after;
            ++n32;
        }
    }
    f32_post /= n32;

    double f12_post = 0;
    int n12 = 0;
    for (const auto& row : fixed_report.rows) {
        f12_post += row.accuracy_after;
        ++n12;
    }
    f12_post /= n12;

    char buf[160];
    std::snprintf(buf, sizeof(buf), "post-retrain seed means: float32 %.3f, fixed12 %.3f",
                  f32_post, f12_post);
    detail = buf;
    return std::fabs(f12_post - f32_post) <= 0.02 + 1e-12;
}

bool criterion7(std::string& detail) {
    for (int seed = 1; seed < 256; ++seed) {
        LfsrState cur{std::uint8_t(seed)};
        std::set<int> visited;
        int steps = 0;
        do {
            visited.insert(cur.reg);
            cur = lfsr_step(cur).second;
            ++steps;
        } while (cur.reg != seed && steps <= 256);
        if (steps != 255 || visited.size() != 255) {
            detail = "period broken at seed " + std::to_string(seed);
            return false;
        }
    }
    const QFormat fmt = QFormat::sgn(12, 8);
    double mean = 0, sq = 0;
    for (int seed = 1; seed < 256; ++seed) {
        auto [v, next] = lfsr_noise(LfsrState{std::uint8_t(seed)}, fmt, LfsrNoiseMode::clt_sum);
        mean += v.value();
        sq += v.value() * v.value();
    }
    mean /= 255;
    const double var = sq / 255 - mean * mean;
    char buf[120];
    std::snprintf(buf, sizeof(buf), "period 255 x 255 seeds; clt mean %.6f, var %.4f", mean,
                  var);
    detail = buf;
    return std::fabs(mean) <= fmt.step() && std::fabs(var - 1.0) <= 0.10;
}

bool criterion8(std::string& detail) {
    const QFormat fmt = QFormat::sgn(8, 4);
    long long checked = 0, mismatches = 0;
    for (int m = -128; m <= 127; ++m)
        for (int e = -8; e <= 8; ++e)
            for (int sign : {-1, 0, 1}) {
                // Exact-rational oracle: integer shift/divide with
                // remainder-based ties-away rounding, then clamp.
                std::int64_t want;
                if (sign == 0) {
                    want = 0;
                } else {
                    std::int64_t v = sign < 0 ? -std::int64_t(m) : m;
                    if (e >= 0) {
                        want = v << e;
                    } else {
                        const std::int64_t d = std::int64_t{1} << (-e);
                        std::int64_t q = v / d;
                        const std::int64_t r = v % d, half = d / 2;
                        if (r >= half) ++q;
                        if (-r >= half) --q;
                        want = q;
                    }
                    want = std::max(fmt.min_mantissa(), std::min(fmt.max_mantissa(), want));
                }
                const auto got = shift_mul(Fixed{m, fmt}, Po2{sign, e}).mantissa;
                ++checked;
                if (got != want) ++mismatches;
            }
    detail = std::to_string(checked) + " cases, " + std::to_string(mismatches) + " mismatches";
    return mismatches == 0;
}

bool criterion9(std::string& detail) {
    const char* bin = std::getenv("ESTRAIN_CLI_BIN");
    if (!bin || !*bin) {
        detail = "ESTRAIN_CLI_BIN not set";
        return false;
    }
    const fs::path dir = fs::temp_directory_path() / "estrain_acceptance_c9";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto log = dir / "log";
    auto run = [&](const std::string& args) {
        const std::string cmd =
            std::string("\"") + bin + "\" " + args + " >>" + log.string() + " 2>&1";
        const int rc = std::system(cmd.c_str());
        return rc < 0 ? rc : WEXITSTATUS(rc);
    };

    const std::string data = "--synthetic 400 --dim 64 --classes 10 --data-seed 2";
    const auto ckpt = dir / "base.ckpt";
    if (run("train-base " + data + " --arch 64,32,16,10 --epochs 10 --train-count 300 "
            "--seed 2 --out " + ckpt.string()) != 0) {
        detail = "baseline training failed";
        return false;
    }

    // (a) worker-count invariance.
    const std::string retrain = "retrain --checkpoint " + ckpt.string() + " " + data +
                                " --sigma-noise 0.4 --layer 0 --pop 16 --iters 30 "
                                "--precision fixed12 --seed 5 ";
    const auto w1 = dir / "w1.ckpt", w8 = dir / "w8.ckpt";
    if (run(retrain + "--workers 1 --out " + w1.string()) != 0 ||
        run(retrain + "--workers 8 --out " + w8.string()) != 0) {
        detail = "retrain run failed";
        return false;
    }
    if (serial::read_file(w1) != serial::read_file(w8)) {
        detail = "workers 1 vs 8 checkpoints differ";
        return false;
    }

    // (b) suspend at t=50 of k=100, resume, compare to uninterrupted.
    const std::string longrun = "retrain --checkpoint " + ckpt.string() + " " + data +
                                " --sigma-noise 0.4 --layer 0 --pop 10 --iters 100 "
                                "--precision fixed12 --seed 6 ";
    const auto full = dir / "full.ckpt";
    if (run(longrun + "--out " + full.string()) != 0) {
        detail = "uninterrupted run failed";
        return false;
    }
    const auto state = dir / "t50.state";
    if (run(longrun + "--suspend-after 50 --state-out " + state.string()) != 0) {
        detail = "suspend run failed";
        return false;
    }
    const auto resumed = dir / "resumed.ckpt";
    if (run(longrun + "--resume-state " + state.string() + " --out " + resumed.string()) != 0) {
        detail = "resume run failed";
        return false;
    }
    const bool same = serial::read_file(full) == serial::read_file(resumed);
    fs::remove_all(dir);
    detail = same ? "workers 1==8; resume at t=50 bit-identical"
                  : "resumed checkpoint differs from uninterrupted";
    return same;
}

bool criterion10(std::string& detail) {
    const Dataset d = generate_synthetic(10, 64, 120, 77);
    BaselineConfig bc;
    bc.dims = {64, 32, 16, 10};
    bc.epochs = 2;
    bc.seed = 77;
    const Model m = quantize_model(train_baseline(d, bc));
    TrainConfig tc;
    tc.population = 7;
    tc.iterations = 9;
    tc.sigma = 0.0625;
    tc.alpha = 0.0078125;
    tc.mask = WeightMask{0, true, {}};
    tc.precision = Precision::fixed(QFormat::sgn(12, 8));
    tc.workers = g_workers;
    const auto res = train(m, d, tc);
    const std::uint64_t want = 120ull * 7 * 9;
    detail = "counted " + std::to_string(res.forward_passes) + ", expected M*N*k = " +
             std::to_string(want);
    return res.forward_passes == want;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> selected;
    g_workers = std::max(1u, std::thread::hardware_concurrency());
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc)
            selected.insert(std::atoi(argv[++i]));
        else if (std::strcmp(argv[i], "--workers") == 0 && i + 1 < argc)
            g_workers = std::atoi(argv[++i]);
    }

    struct Entry {
        int id;
        const char* name;
        std::function<bool(std::string&)> fn;
    };
    const Entry entries[] = {
        {1, "Eq. 5 headline: 100 s total training time, exact", criterion1},
        {2, "table sweep: forward-pass counts and LUT/FF pairs, exact", criterion2},
        {3, "utilization percentages match printed precision", criterion3},
        {4, "gradient estimator: 5% on linear reward, antithetic exact", criterion4},
        {5, "desk-scale recovery: post > pre, >= 5 points at sigma 0.5", criterion5},
        {6, "12-bit fixed path within 2 points of float32 reference", criterion6},
        {7, "LFSR period 255 exhaustive; clt mean/variance bounds", criterion7},
        {8, "shift_mul exhaustive equivalence, zero mismatches", criterion8},
        {9, "determinism: workers 1 vs 8; suspend/resume at t=50", criterion9},
        {10, "forward-pass accounting equals M*N*k", criterion10},
    };

    int failures = 0;
    for (const auto& e : entries) {
        if (!selected.empty() && !selected.count(e.id)) continue;
        std::string detail;
        bool ok = false;
        try {
            ok = e.fn(detail);
        } catch (const std::exception& ex) {
            detail = std::string("exception: ") + ex.what();
        }
        std::printf("%s criterion %2d: %s%s%s\n", ok ? "PASS" : "FAIL", e.id, e.name,
                    detail.empty() ? "" : " -- ", detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    return failures;
}
