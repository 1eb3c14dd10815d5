#pragma once

// Recovery experiment: train a baseline, quantize it for deployment,
// corrupt the validation inputs with Gaussian noise, measure the damage,
// retrain the first (or a chosen) layer with the forward-pass trainer on
// the corrupted data, and measure the recovery. Repeats across a noise
// grid, a list of training precisions, and independent seeds.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "estrain/baseline.hpp"
#include "estrain/dataset.hpp"
#include "estrain/trainer.hpp"

namespace estrain {

struct PrecisionChoice {
    std::string label;        // e.g. "float32", "fixed16", "fixed12"
    Precision precision;
    LossQuant loss_quant = LossQuant::exact;
    int act_bits = 16;        // deployed activation width for this row
};

inline PrecisionChoice precision_float32() {
    return {"float32", Precision::float_ref(), LossQuant::exact, 16};
}
inline PrecisionChoice precision_fixed(int total_bits, int frac_bits, LossQuant lq) {
    return {"fixed" + std::to_string(total_bits),
            Precision::fixed(QFormat::sgn(total_bits, frac_bits)), lq, total_bits};
}

struct ExperimentConfig {
    // Data source: synthetic blobs by default, IDX files when paths given.
    bool synthetic = true;
    int classes = 10;
    int dim = 64;
    std::size_t synthetic_count = 6000;
    std::filesystem::path images_path, labels_path;
    std::size_t train_count = 4000;

    // Baseline model.
    std::vector<int> arch = {64, 32, 16, 10};
    QFormat weight_fmt = QFormat::sgn(4, 3);
    int baseline_epochs = 30;
    double baseline_lr = 0.05;

    // Corruption and recovery.
    std::vector<double> sigma_grid = {0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<PrecisionChoice> precisions = {precision_float32()};
    int train_layer = 0;
    int population = 100;
    int iterations = 100;
    double es_sigma = 0.0625;
    double es_alpha = 0.0078125;  // 2^-7, shift-friendly
    std::size_t retrain_samples = 2000;

    std::uint64_t seed = 1;
    int replicates = 5;
    int workers = 1;
};

struct ExperimentRow {
    double noise_sigma = 0;
    std::string precision;
    int replicate = 0;
    double accuracy_before = 0;
    double accuracy_after = 0;
    std::uint64_t forward_passes = 0;
    std::uint64_t retrain_samples = 0;
};

struct ExperimentReport {
    std::vector<ExperimentRow> rows;
    double clean_float_accuracy = 0;  // seed-mean of the unquantized baseline
    double wall_seconds = 0;          // not part of the deterministic artifact
};

namespace detail {
struct ReplicateSeeds {
    std::uint64_t data, baseline, noise, es;
};
inline ReplicateSeeds replicate_seeds(std::uint64_t master, int replicate) {
    const std::uint64_t r = derive_seed(master, 0xEE0000ull + std::uint64_t(replicate));
    return {derive_seed(r, 1), derive_seed(r, 2), derive_seed(r, 3), derive_seed(r, 4)};
}
}  // namespace detail

inline ExperimentReport run_recovery_experiment(const ExperimentConfig& cfg) {
    if (cfg.replicates < 1) throw std::invalid_argument("experiment: replicates must be >= 1");
    if (cfg.precisions.empty()) throw std::invalid_argument("experiment: no precisions");
    const auto t0 = std::chrono::steady_clock::now();

    ExperimentReport report;
    double clean_sum = 0;

    for (int rep = 0; rep < cfg.replicates; ++rep) {
        const auto seeds = detail::replicate_seeds(cfg.seed, rep);

        Dataset full = cfg.synthetic
                           ? generate_synthetic(cfg.classes, cfg.dim, cfg.synthetic_count,
                                                seeds.data)
                           : load_idx(cfg.images_path, cfg.labels_path);
        auto [train_set, val_set] = split(full, cfg.train_count, seeds.data, !cfg.synthetic);

        BaselineConfig bc;
        bc.dims = cfg.arch;
        bc.epochs = cfg.baseline_epochs;
        bc.learning_rate = cfg.baseline_lr;
        bc.seed = seeds.baseline;
        const Model float_model = train_baseline(train_set, bc);
        clean_sum += evaluate_accuracy(float_model, val_set);

        for (double noise_sigma : cfg.sigma_grid) {
            const Dataset noisy_val = inject_noise(val_set, noise_sigma, seeds.noise);
            Dataset retrain_set;
            {
                const std::size_t n = std::min(cfg.retrain_samples, noisy_val.size());
                retrain_set.dim = noisy_val.dim;
                retrain_set.num_classes = noisy_val.num_classes;
                retrain_set.features.assign(noisy_val.features.begin(),
                                            noisy_val.features.begin() +
                                                std::ptrdiff_t(n) * noisy_val.dim);
                retrain_set.labels.assign(noisy_val.labels.begin(),
                                          noisy_val.labels.begin() + std::ptrdiff_t(n));
            }

            for (const auto& pc : cfg.precisions) {
                QuantSpec qs;
                qs.weight_fmt = cfg.weight_fmt;
                qs.act_bits = pc.act_bits;
                const Model deployed = quantize_model(float_model, qs);

                ExperimentRow row;
                row.noise_sigma = noise_sigma;
                row.precision = pc.label;
                row.replicate = rep;
                row.retrain_samples = retrain_set.size();
                row.accuracy_before = evaluate_accuracy(deployed, noisy_val);

                TrainConfig tc;
                tc.population = cfg.population;
                tc.iterations = cfg.iterations;
                tc.sigma = cfg.es_sigma;
                tc.alpha = cfg.es_alpha;
                tc.seed = seeds.es;
                tc.mask = WeightMask{cfg.train_layer, true, {}};
                tc.precision = pc.precision;
                tc.loss_quant = pc.loss_quant;
                tc.workers = cfg.workers;
                const TrainResult res = train(deployed, retrain_set, tc);

                row.accuracy_after = evaluate_accuracy(res.model, noisy_val);
                row.forward_passes = res.forward_passes;
                report.rows.push_back(std::move(row));
            }
        }
    }

    report.clean_float_accuracy = clean_sum / cfg.replicates;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace estrain
