// Command-line frontend for the incremental-training toolkit.
//
//   estrain train-base   train a float baseline, quantize, write checkpoint
//   estrain retrain      forward-pass retraining of one layer (pause/resume)
//   estrain experiment   noise-recovery sweep over sigma x precision x seeds
//   estrain hwcost       training-time / area tables and interleave traces
//
// Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure.
// Identical flags and seeds produce byte-identical artifacts; --workers
// only changes scheduling, never results.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "estrain/baseline.hpp"
#include "estrain/checkpoint.hpp"
#include "estrain/csv.hpp"
#include "estrain/dataset.hpp"
#include "estrain/experiment.hpp"
#include "estrain/hwcost.hpp"
#include "estrain/manifest.hpp"
#include "estrain/trainer.hpp"
#include "estrain/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// --- shared option bundles ---------------------------------------------

struct DataOpts {
    std::string images, labels;
    std::size_t synthetic = 0;
    int dim = 64;
    int classes = 10;
    std::uint64_t data_seed = 1;
};

void add_data_opts(CLI::App* cmd, DataOpts& d) {
    cmd->add_option("--images", d.images, "IDX image file");
    cmd->add_option("--labels", d.labels, "IDX label file");
    cmd->add_option("--synthetic", d.synthetic, "generate a synthetic dataset of this size");
    cmd->add_option("--dim", d.dim, "synthetic feature dimension")->check(CLI::PositiveNumber);
    cmd->add_option("--classes", d.classes, "synthetic class count")->check(CLI::PositiveNumber);
    cmd->add_option("--data-seed", d.data_seed, "synthetic data seed");
}

fs::path resolve_data_path(const std::string& p) {
    const char* dir = std::getenv("ESTRAIN_DATA_DIR");
    fs::path path(p);
    if (dir && *dir && path.is_relative()) return fs::path(dir) / path;
    return path;
}

estrain::Dataset load_data(const DataOpts& d) {
    if (d.synthetic > 0)
        return estrain::generate_synthetic(d.classes, d.dim, d.synthetic, d.data_seed);
    if (d.images.empty() || d.labels.empty())
        throw CLI::ValidationError("data", "provide --images/--labels or --synthetic");
    return estrain::load_idx(resolve_data_path(d.images), resolve_data_path(d.labels));
}

json data_json(const DataOpts& d) {
    json j;
    if (d.synthetic > 0) {
        j["source"] = "synthetic";
        j["count"] = d.synthetic;
        j["dim"] = d.dim;
        j["classes"] = d.classes;
        j["data_seed"] = d.data_seed;
    } else {
        j["source"] = "idx";
        j["images"] = d.images;
        j["labels"] = d.labels;
    }
    return j;
}

estrain::Precision parse_precision(const std::string& s, int* act_bits) {
    if (s == "float32") {
        *act_bits = 16;
        return estrain::Precision::float_ref();
    }
    if (s.rfind("fixed", 0) == 0) {
        const std::string rest = s.substr(5);
        int total = 0, frac = -1;
        const auto dot = rest.find('.');
        try {
            if (dot == std::string::npos) {
                total = std::stoi(rest);
            } else {
                total = std::stoi(rest.substr(0, dot));
                frac = std::stoi(rest.substr(dot + 1));
            }
        } catch (...) {
            throw CLI::ValidationError("--precision", "expected float32 or fixed<bits>[.<frac>]");
        }
        if (frac < 0) frac = total - 4;
        *act_bits = total;
        return estrain::Precision::fixed(estrain::QFormat::sgn(total, frac));
    }
    throw CLI::ValidationError("--precision", "expected float32 or fixed<bits>[.<frac>]");
}

std::vector<int> parse_arch(const std::string& s) {
    std::vector<int> dims;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto comma = s.find(',', pos);
        const std::string tok = s.substr(pos, comma == std::string::npos ? comma : comma - pos);
        if (!tok.empty()) dims.push_back(std::stoi(tok));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (dims.size() < 2) throw CLI::ValidationError("--arch", "need at least two dims");
    return dims;
}

std::vector<double> parse_grid(const std::string& s) {
    std::vector<double> g;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto comma = s.find(',', pos);
        const std::string tok = s.substr(pos, comma == std::string::npos ? comma : comma - pos);
        if (!tok.empty()) g.push_back(std::stod(tok));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return g;
}

// --- train-base ---------------------------------------------------------

int cmd_train_base(CLI::App& app) {
    auto* cmd = app.add_subcommand("train-base",
                                   "train a float baseline and write a quantized checkpoint");
    auto d = std::make_shared<DataOpts>();
    add_data_opts(cmd, *d);
    auto arch = std::make_shared<std::string>("64,32,16,10");
    auto epochs = std::make_shared<int>(30);
    auto lr = std::make_shared<double>(0.05);
    auto seed = std::make_shared<std::uint64_t>(1);
    auto weight_bits = std::make_shared<int>(4);
    auto act_bits = std::make_shared<int>(16);
    auto train_count = std::make_shared<std::size_t>(4000);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--arch", *arch, "layer dims, comma separated");
    cmd->add_option("--epochs", *epochs, "SGD epochs")->check(CLI::NonNegativeNumber);
    cmd->add_option("--lr", *lr, "SGD learning rate");
    cmd->add_option("--seed", *seed, "baseline init/shuffle seed");
    cmd->add_option("--weight-bits", *weight_bits, "deployed weight width")
        ->check(CLI::Range(2, 32));
    cmd->add_option("--act-bits", *act_bits, "deployed activation width")
        ->check(CLI::Range(6, 32));
    cmd->add_option("--train-count", *train_count, "samples used for training; rest validate");
    cmd->add_option("--out", *out, "output checkpoint path")->required();

    cmd->callback([=]() {
        const estrain::Dataset full = load_data(*d);
        if (*train_count == 0 || *train_count >= full.size())
            throw CLI::ValidationError("--train-count", "must split the dataset");
        auto [train_set, val_set] =
            estrain::split(full, *train_count, d->data_seed, d->synthetic == 0);

        estrain::BaselineConfig bc;
        bc.dims = parse_arch(*arch);
        bc.epochs = *epochs;
        bc.learning_rate = *lr;
        bc.seed = *seed;
        const estrain::Model fm = estrain::train_baseline(train_set, bc);
        const double facc = estrain::evaluate_accuracy(fm, val_set);

        estrain::QuantSpec qs;
        qs.weight_fmt = estrain::QFormat::sgn(*weight_bits, *weight_bits - 1);
        qs.act_bits = *act_bits;
        const estrain::Model qm = estrain::quantize_model(fm, qs);
        const double qacc = estrain::evaluate_accuracy(qm, val_set);

        estrain::save_checkpoint(qm, *out);
        json cfg;
        cfg["data"] = data_json(*d);
        cfg["arch"] = *arch;
        cfg["epochs"] = *epochs;
        cfg["lr"] = *lr;
        cfg["seed"] = *seed;
        cfg["weight_bits"] = *weight_bits;
        cfg["act_bits"] = *act_bits;
        cfg["train_count"] = *train_count;
        estrain::write_manifest(*out, "train-base", cfg);
        std::cerr << "baseline accuracy " << facc << ", quantized " << qacc << ", wrote "
                  << *out << "\n";
    });
    return 0;
}

// --- retrain -------------------------------------------------------------

int cmd_retrain(CLI::App& app) {
    auto* cmd = app.add_subcommand("retrain", "forward-pass retraining of one layer");
    auto d = std::make_shared<DataOpts>();
    add_data_opts(cmd, *d);
    auto ckpt = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto history = std::make_shared<std::string>();
    auto sigma_noise = std::make_shared<double>(0.0);
    auto layer = std::make_shared<int>(0);
    auto pop = std::make_shared<int>(100);
    auto iters = std::make_shared<int>(100);
    auto sigma = std::make_shared<double>(0.0625);
    auto alpha = std::make_shared<double>(0.0078125);
    auto precision = std::make_shared<std::string>("float32");
    auto loss_quant = std::make_shared<std::string>("exact");
    auto seed = std::make_shared<std::uint64_t>(1);
    auto workers = std::make_shared<int>(1);
    auto retrain_samples = std::make_shared<std::size_t>(0);
    auto resume_state = std::make_shared<std::string>();
    auto suspend_after = std::make_shared<int>(-1);
    auto state_out = std::make_shared<std::string>();

    cmd->add_option("--checkpoint", *ckpt, "input checkpoint")->required();
    cmd->add_option("--out", *out, "output checkpoint");
    cmd->add_option("--history", *history, "per-iteration history CSV");
    cmd->add_option("--sigma-noise", *sigma_noise, "input corruption level")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--layer", *layer, "layer to retrain")->check(CLI::NonNegativeNumber);
    cmd->add_option("--pop", *pop, "population size N")->check(CLI::PositiveNumber);
    cmd->add_option("--iters", *iters, "iterations k")->check(CLI::PositiveNumber);
    cmd->add_option("--sigma", *sigma, "perturbation scale");
    cmd->add_option("--alpha", *alpha, "learning rate");
    cmd->add_option("--precision", *precision, "float32 or fixed<bits>[.<frac>]");
    cmd->add_option("--loss-quant", *loss_quant, "exact or po2")
        ->check(CLI::IsMember({"exact", "po2"}));
    cmd->add_option("--seed", *seed, "training noise seed");
    cmd->add_option("--workers", *workers, "worker threads (never changes results)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--retrain-samples", *retrain_samples,
                    "cap on retraining samples (0 = whole set)");
    cmd->add_option("--resume-state", *resume_state, "resume from a state blob");
    cmd->add_option("--suspend-after", *suspend_after,
                    "suspend after this iteration and write --state-out");
    cmd->add_option("--state-out", *state_out, "state blob path for --suspend-after");

    cmd->callback([=]() {
        if (*suspend_after >= 0 && state_out->empty())
            throw CLI::ValidationError("--suspend-after", "requires --state-out");
        if (*suspend_after < 0 && out->empty())
            throw CLI::ValidationError("--out", "required unless suspending");

        const estrain::Model base = estrain::load_checkpoint(*ckpt);
        estrain::Dataset data = load_data(*d);
        data = estrain::inject_noise(data, *sigma_noise, *seed);
        if (*retrain_samples > 0 && *retrain_samples < data.size()) {
            data.features.resize(*retrain_samples * std::size_t(data.dim));
            data.labels.resize(*retrain_samples);
        }

        std::optional<estrain::Trainer> tr;
        if (!resume_state->empty()) {
            tr.emplace(estrain::Trainer::resume(estrain::serial::read_file(*resume_state),
                                                base, data));
            tr->set_workers(*workers);
        } else {
            estrain::TrainConfig tc;
            tc.population = *pop;
            tc.iterations = *iters;
            tc.sigma = *sigma;
            tc.alpha = *alpha;
            tc.seed = *seed;
            tc.mask = estrain::WeightMask{*layer, true, {}};
            int act_bits = 0;
            tc.precision = parse_precision(*precision, &act_bits);
            tc.loss_quant =
                *loss_quant == "po2" ? estrain::LossQuant::po2 : estrain::LossQuant::exact;
            tc.workers = *workers;
            tr.emplace(base, data, tc);
        }

        json cfg;
        cfg["checkpoint"] = *ckpt;
        cfg["data"] = data_json(*d);
        cfg["sigma_noise"] = *sigma_noise;
        cfg["layer"] = tr->config().mask.layer_index;
        cfg["pop"] = tr->config().population;
        cfg["iters"] = tr->config().iterations;
        cfg["sigma"] = tr->config().sigma;
        cfg["alpha"] = tr->config().alpha;
        cfg["precision"] = *precision;
        cfg["loss_quant"] = *loss_quant;
        cfg["seed"] = tr->config().seed;
        cfg["retrain_samples"] = data.size();

        const bool suspending = *suspend_after >= 0;
        while (!tr->done() && !(suspending && tr->t() >= *suspend_after)) tr->step();

        auto write_history = [&](const fs::path& path) {
            estrain::csv::File f(path);
            f.row({"t", "mean_loss", "forward_passes"});
            const auto& h = tr->history();
            for (std::size_t i = 0; i < h.size(); ++i)
                f.row({estrain::csv::num(std::int64_t(i)), estrain::csv::num(h[i].mean_loss),
                       estrain::csv::num(h[i].forward_passes)});
            f.close();
            estrain::write_manifest(path, "retrain", cfg);
        };

        if (suspending && !tr->done()) {
            estrain::serial::write_file(*state_out, tr->suspend());
            estrain::write_manifest(*state_out, "retrain", cfg);
            if (!history->empty()) write_history(*history);
            std::cerr << "suspended at t=" << tr->t() << ", state in " << *state_out << "\n";
            return;
        }

        estrain::save_checkpoint(tr->current_model(), *out);
        estrain::write_manifest(*out, "retrain", cfg);
        if (!history->empty()) write_history(*history);
        std::cerr << "retrained to t=" << tr->t() << ", forward passes "
                  << tr->forward_passes() << ", wrote " << *out << "\n";
    });
    return 0;
}

// --- experiment -----------------------------------------------------------

int cmd_experiment(CLI::App& app) {
    auto* cmd = app.add_subcommand("experiment",
                                   "noise-recovery sweep: corrupt, measure, retrain, measure");
    auto d = std::make_shared<DataOpts>();
    add_data_opts(cmd, *d);
    d->synthetic = 6000;
    auto arch = std::make_shared<std::string>("64,32,16,10");
    auto train_count = std::make_shared<std::size_t>(4000);
    auto epochs = std::make_shared<int>(30);
    auto lr = std::make_shared<double>(0.05);
    auto sigma_grid = std::make_shared<std::string>("0,0.25,0.5,0.75,1.0");
    auto precisions = std::make_shared<std::string>("float32,fixed16,fixed12");
    auto loss_quant = std::make_shared<std::string>("exact");
    auto pop = std::make_shared<int>(100);
    auto iters = std::make_shared<int>(100);
    auto es_sigma = std::make_shared<double>(0.0625);
    auto es_alpha = std::make_shared<double>(0.0078125);
    auto retrain_samples = std::make_shared<std::size_t>(2000);
    auto seed = std::make_shared<std::uint64_t>(1);
    auto replicates = std::make_shared<int>(1);
    auto workers = std::make_shared<int>(1);
    auto layer = std::make_shared<int>(0);
    auto out = std::make_shared<std::string>();

    cmd->add_option("--arch", *arch, "layer dims");
    cmd->add_option("--train-count", *train_count, "baseline training samples");
    cmd->add_option("--epochs", *epochs, "baseline epochs");
    cmd->add_option("--lr", *lr, "baseline learning rate");
    cmd->add_option("--sigma-grid", *sigma_grid, "comma-separated corruption levels");
    cmd->add_option("--precisions", *precisions, "comma-separated precision labels");
    cmd->add_option("--loss-quant", *loss_quant, "loss quantization for fixed rows")
        ->check(CLI::IsMember({"exact", "po2"}));
    cmd->add_option("--pop", *pop, "population size N")->check(CLI::PositiveNumber);
    cmd->add_option("--iters", *iters, "iterations k")->check(CLI::PositiveNumber);
    cmd->add_option("--es-sigma", *es_sigma, "perturbation scale");
    cmd->add_option("--es-alpha", *es_alpha, "learning rate");
    cmd->add_option("--retrain-samples", *retrain_samples, "retraining subset size");
    cmd->add_option("--seed", *seed, "master seed");
    cmd->add_option("--seeds", *replicates, "independent replicates")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--workers", *workers, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--layer", *layer, "layer to retrain")->check(CLI::NonNegativeNumber);
    cmd->add_option("--out", *out, "report CSV path")->required();

    cmd->callback([=]() {
        estrain::ExperimentConfig ec;
        ec.synthetic = d->synthetic > 0;
        ec.classes = d->classes;
        ec.dim = d->dim;
        ec.synthetic_count = d->synthetic;
        if (!ec.synthetic) {
            ec.images_path = resolve_data_path(d->images);
            ec.labels_path = resolve_data_path(d->labels);
        }
        ec.train_count = *train_count;
        ec.arch = parse_arch(*arch);
        ec.baseline_epochs = *epochs;
        ec.baseline_lr = *lr;
        ec.sigma_grid = parse_grid(*sigma_grid);
        const auto lq =
            *loss_quant == "po2" ? estrain::LossQuant::po2 : estrain::LossQuant::exact;
        ec.precisions.clear();
        std::size_t pos = 0;
        while (pos <= precisions->size()) {
            const auto comma = precisions->find(',', pos);
            const std::string tok =
                precisions->substr(pos, comma == std::string::npos ? comma : comma - pos);
            if (!tok.empty()) {
                int act_bits = 0;
                const auto p = parse_precision(tok, &act_bits);
                ec.precisions.push_back({tok, p, p.is_fixed() ? lq : estrain::LossQuant::exact,
                                         act_bits});
            }
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        ec.train_layer = *layer;
        ec.population = *pop;
        ec.iterations = *iters;
        ec.es_sigma = *es_sigma;
        ec.es_alpha = *es_alpha;
        ec.retrain_samples = *retrain_samples;
        ec.seed = *seed;
        ec.replicates = *replicates;
        ec.workers = *workers;

        const auto report = estrain::run_recovery_experiment(ec);

        estrain::csv::File f(*out);
        f.row({"sigma", "precision", "replicate", "accuracy_before", "accuracy_after",
               "forward_passes", "retrain_samples"});
        for (const auto& r : report.rows)
            f.row({estrain::csv::num(r.noise_sigma), r.precision,
                   estrain::csv::num(std::int64_t(r.replicate)),
                   estrain::csv::num(r.accuracy_before), estrain::csv::num(r.accuracy_after),
                   estrain::csv::num(r.forward_passes),
                   estrain::csv::num(std::uint64_t(r.retrain_samples))});
        f.close();

        json cfg;
        cfg["data"] = data_json(*d);
        cfg["arch"] = *arch;
        cfg["sigma_grid"] = *sigma_grid;
        cfg["precisions"] = *precisions;
        cfg["loss_quant"] = *loss_quant;
        cfg["pop"] = *pop;
        cfg["iters"] = *iters;
        cfg["es_sigma"] = *es_sigma;
        cfg["es_alpha"] = *es_alpha;
        cfg["retrain_samples"] = *retrain_samples;
        cfg["seed"] = *seed;
        cfg["seeds"] = *replicates;
        estrain::write_manifest(*out, "experiment", cfg);
        std::cerr << "clean float accuracy " << report.clean_float_accuracy << ", "
                  << report.rows.size() << " rows in " << report.wall_seconds << "s, wrote "
                  << *out << "\n";
    });
    return 0;
}

// --- hwcost ----------------------------------------------------------------

int cmd_hwcost(CLI::App& app) {
    auto* cmd = app.add_subcommand("hwcost", "training-time and area model");
    auto tf = std::make_shared<double>(1e-6);
    auto tl = std::make_shared<double>(0.0);
    auto tg = std::make_shared<double>(0.0);
    auto tu = std::make_shared<double>(0.0);
    auto W = std::make_shared<std::int64_t>(157000);
    auto P = std::make_shared<std::int64_t>(0);
    auto M = std::make_shared<std::int64_t>(10000);
    auto N = std::make_shared<std::int64_t>(100);
    auto K = std::make_shared<std::int64_t>(100);
    auto p_list = std::make_shared<std::string>("1,10,100,1000,2000");
    auto include_acc = std::make_shared<bool>(false);
    auto out = std::make_shared<std::string>();
    auto arrivals_path = std::make_shared<std::string>();
    auto policy = std::make_shared<std::string>("gaps");
    auto trace_out = std::make_shared<std::string>();

    cmd->add_option("--tf", *tf, "forward-pass time in seconds");
    cmd->add_option("--tl", *tl, "loss time");
    cmd->add_option("--tg", *tg, "gradient time");
    cmd->add_option("--tu", *tu, "update time");
    cmd->add_option("--W", *W, "trainable weights")->check(CLI::PositiveNumber);
    auto* p_opt = cmd->add_option("--P", *P, "training blocks (default: sweep --P-list)");
    cmd->add_option("--M", *M, "images")->check(CLI::PositiveNumber);
    cmd->add_option("--N", *N, "population")->check(CLI::PositiveNumber);
    cmd->add_option("--k", *K, "iterations")->check(CLI::PositiveNumber);
    cmd->add_option("--P-list", *p_list, "comma-separated sweep of P");
    cmd->add_flag("--include-loss-acc", *include_acc, "count the loss accumulator too");
    cmd->add_option("--out", *out, "cost table CSV");
    cmd->add_option("--arrivals", *arrivals_path, "inference arrival times, one per line");
    cmd->add_option("--policy", *policy, "gaps or block")
        ->check(CLI::IsMember({"gaps", "block"}));
    cmd->add_option("--trace", *trace_out, "interleave trace CSV");

    cmd->callback([=]() {
        std::vector<std::int64_t> ps;
        if (p_opt->count() > 0) {
            if (*P < 1) throw CLI::ValidationError("--P", "must be >= 1");
            ps.push_back(*P);
        } else {
            for (double v : parse_grid(*p_list)) ps.push_back(std::int64_t(v));
        }
        std::printf("%-8s %-16s %-12s %-12s %-14s %-12s\n", "P", "fwd/iter/img", "LUT", "FF",
                    "iter_time_s", "total_s");
        std::optional<estrain::csv::File> f;
        if (!out->empty()) {
            f.emplace(*out);
            f->row({"P", "forward_passes_per_iteration_per_image", "lut", "ff", "lut_pct",
                    "ff_pct", "iteration_time_s", "iteration_time_ceil_s",
                    "total_training_time_s"});
        }
        for (auto p : ps) {
            estrain::hw::HwParams hp{*tf, *tl, *tg, *tu, *W, p, *M, *N, *K};
            const double fwd = estrain::hw::forward_passes_per_iteration_per_image(*W, p, *N);
            const auto area = estrain::hw::area_overhead(p, *include_acc);
            const double it = estrain::hw::iteration_time(hp);
            const double itc = estrain::hw::iteration_time_ceil(hp);
            const double tot = estrain::hw::total_training_time(hp);
            std::printf("%-8lld %-16.10g %-12lld %-12lld %-14.10g %-12.10g\n",
                        (long long)p, fwd, (long long)area.lut, (long long)area.ff, it, tot);
            if (f)
                f->row({estrain::csv::num(p), estrain::csv::num(fwd),
                        estrain::csv::num(area.lut), estrain::csv::num(area.ff),
                        estrain::csv::num(area.lut_pct), estrain::csv::num(area.ff_pct),
                        estrain::csv::num(it), estrain::csv::num(itc), estrain::csv::num(tot)});
        }
        json cfg;
        cfg["tf"] = *tf;
        cfg["W"] = *W;
        cfg["M"] = *M;
        cfg["N"] = *N;
        cfg["k"] = *K;
        cfg["P"] = *P > 0 ? estrain::csv::num(*P) : *p_list;
        if (f) {
            f->close();
            estrain::write_manifest(*out, "hwcost", cfg);
        }

        if (!arrivals_path->empty()) {
            if (trace_out->empty())
                throw CLI::ValidationError("--arrivals", "requires --trace");
            std::ifstream af(*arrivals_path);
            if (!af) throw std::runtime_error("cannot open arrivals: " + *arrivals_path);
            std::vector<double> arrivals;
            double v;
            while (af >> v) arrivals.push_back(v);
            estrain::hw::HwParams hp{*tf, *tl, *tg, *tu, *W, ps.front(), *M, *N, *K};
            const auto policy_v = *policy == "block"
                                      ? estrain::hw::SchedulePolicy::block_until_done
                                      : estrain::hw::SchedulePolicy::train_in_gaps;
            const auto trace = estrain::hw::simulate_interleave(arrivals, hp, policy_v);
            estrain::csv::File tf2(*trace_out);
            tf2.row({"kind", "start", "duration"});
            for (const auto& e : trace.events)
                tf2.row({estrain::hw::to_string(e.kind), estrain::csv::num(e.start),
                         estrain::csv::num(e.duration)});
            tf2.close();
            estrain::write_manifest(*trace_out, "hwcost", cfg);
            std::cerr << "training completed at " << trace.training_completed_at
                      << "s, trace in " << *trace_out << "\n";
        }
    });
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"forward-pass incremental training toolkit"};
    app.set_version_flag("--version", estrain::version_string);
    app.require_subcommand(1);

    cmd_train_base(app);
    cmd_retrain(app);
    cmd_experiment(app);
    cmd_hwcost(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
