#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "estrain/baseline.hpp"
#include "estrain/checkpoint.hpp"
#include "estrain/trainer.hpp"

using namespace estrain;

namespace {

// One-output toy: single 1x1 layer, promoted to the ES format so the mask
// covers exactly {weight} or {weight, bias}.
Model one_weight_model(double w0) {
    Model m;
    m.input_dim = 1;
    m.num_classes = 1;
    DenseLayer l;
    l.in_dim = 1;
    l.out_dim = 1;
    l.activation = Activation::none;
    l.weight_fmt = QFormat::sgn(12, 8);
    l.in_fmt = QFormat::uns(12, 8);
    l.act_fmt = QFormat::sgn(16, 8);
    l.w = {std::int32_t(quantize(w0, l.weight_fmt).mantissa)};
    l.b = {0};
    m.layers.push_back(l);
    m.validate();
    return m;
}

Dataset two_sample_data() {
    Dataset d;
    d.dim = 1;
    d.num_classes = 1;
    d.features = {0.5f, 0.25f};
    d.labels = {0, 0};
    return d;
}

Dataset blob_data(int classes, int dim, std::size_t n, std::uint64_t seed) {
    return generate_synthetic(classes, dim, n, seed);
}

// A small quantized model for end-to-end trainer tests.
Model small_quant_model(int in, int hidden, int classes, std::uint64_t seed) {
    Dataset train = blob_data(classes, in, 400, seed);
    BaselineConfig bc;
    bc.dims = {in, hidden, classes};
    bc.epochs = 8;
    bc.learning_rate = 0.05;
    bc.seed = seed;
    return quantize_model(train_baseline(train, bc));
}

}  // namespace

TEST_CASE("neg_mae_loss: examples", "[trainer]") {
    CHECK(neg_mae_loss({0, 1, 0}, 1, 3) == 0.0);
    std::vector<double> zeros(10, 0.0);
    CHECK(neg_mae_loss(zeros, 4, 10) == Catch::Approx(-0.1).margin(1e-15));
    std::vector<double> halves(10, 0.5);
    CHECK(neg_mae_loss(halves, 7, 10) == Catch::Approx(-0.5).margin(1e-15));
    CHECK_THROWS_AS(neg_mae_loss(zeros, 10, 10), std::out_of_range);
    CHECK_THROWS_AS(neg_mae_loss(zeros, 0, 9), std::invalid_argument);
}

TEST_CASE("estimate_gradient: single-term and antithetic examples", "[trainer]") {
    auto g = estimate_gradient({{2.0}}, {0.3}, 1.0);
    CHECK(g[0] == Catch::Approx(0.6).margin(1e-15));

    g = estimate_gradient({{1.0}, {-1.0}}, {0.0, 0.0}, 0.5);
    CHECK(g[0] == 0.0);

    g = estimate_gradient({{1.0}, {-1.0}}, {0.2, -0.2}, 0.5);
    CHECK(g[0] == Catch::Approx(0.4).margin(1e-15));

    CHECK_THROWS_AS(estimate_gradient({{1.0}}, {0.1, 0.2}, 0.5), std::invalid_argument);
}

TEST_CASE("estimator consistency on a linear reward", "[trainer]") {
    // f(w) = a*w; the expectation of the estimate is a.
    const double a = 3.0, sigma = 0.1, w = 0.3;
    const int N = 10000;
    std::vector<std::vector<double>> eps(N, std::vector<double>(1));
    std::vector<double> losses(N);
    for (int i = 0; i < N; ++i) {
        eps[i][0] = normal(77, 0, i, 0);
        losses[i] = a * (w + sigma * eps[i][0]);
    }
    const auto g = estimate_gradient(eps, losses, sigma);
    CHECK(std::fabs(g[0] - a) / a <= 0.05);
}

TEST_CASE("antithetic pairs recover a linear slope exactly", "[trainer]") {
    // Dyadic values keep the arithmetic exact in doubles.
    const double a = 3.0, sigma = 0.25, w = 0.5;
    const std::vector<std::vector<double>> eps = {{1.0}, {-1.0}};
    const std::vector<double> losses = {a * (w + sigma), a * (w - sigma)};
    const auto g = estimate_gradient(eps, losses, sigma);
    CHECK(g[0] == a);
}

TEST_CASE("update_weights: identity cases and fixed-path saturation", "[trainer]") {
    CHECK(update_weights({0.5, -0.25}, {0.0, 0.0}, 0.7) == std::vector<double>{0.5, -0.25});
    CHECK(update_weights({0.5}, {123.0}, 0.0) == std::vector<double>{0.5});

    const QFormat f = QFormat::sgn(12, 8);
    Accumulator pos{1 << 20, 8};
    const std::int32_t maxm = std::int32_t(f.max_mantissa());
    CHECK(update_weight_fixed(maxm, pos, 0.25, nullptr, f) == maxm);
    const Po2 alpha{1, -2};
    CHECK(update_weight_fixed(maxm, pos, 0.25, &alpha, f) == maxm);
    // And a plain step moves by alpha*acc.
    Accumulator acc{256, 8};  // value 1.0 at frac 8
    CHECK(update_weight_fixed(0, acc, 0.25, nullptr, f) == 64);
    CHECK(update_weight_fixed(0, acc, 0.25, &alpha, f) == 64);
}

TEST_CASE("evaluate_population: forced zero noise gives the base-model loss", "[trainer]") {
    const Model m = one_weight_model(0.5);
    const Dataset d = two_sample_data();
    TrainConfig cfg;
    cfg.population = 1;
    cfg.iterations = 1;
    cfg.sigma = 0.0625;
    cfg.alpha = 0.0078125;
    cfg.seed = 5;
    cfg.mask = WeightMask{0, false, {0}};
    cfg.precision = Precision::fixed(QFormat::sgn(12, 8));
    auto zero_noise = [](int, int, std::size_t) { return 0.0; };
    const auto losses = evaluate_population(m, cfg.mask, d, cfg, 0, zero_noise);
    REQUIRE(losses.size() == 1);
    // Base loss by the public ops: mean of per-sample neg MAE.
    double want = 0;
    for (std::size_t s = 0; s < d.size(); ++s) {
        const auto out = model_forward(m, {quantize(d.features[s], m.layers[0].in_fmt)});
        want += neg_mae_loss({out[0].value()}, 0, 1);
    }
    want /= double(d.size());
    CHECK(losses[0] == want);
}

TEST_CASE("evaluate_population: duplicated data leaves losses unchanged", "[trainer]") {
    const Model m = one_weight_model(0.5);
    Dataset d = two_sample_data();
    TrainConfig cfg;
    cfg.population = 3;
    cfg.sigma = 0.0625;
    cfg.mask = WeightMask{0, false, {0}};
    cfg.precision = Precision::fixed(QFormat::sgn(12, 8));
    const auto once = evaluate_population(m, cfg.mask, d, cfg, 0);
    Dataset doubled = d;
    doubled.features.insert(doubled.features.end(), d.features.begin(), d.features.end());
    doubled.labels.insert(doubled.labels.end(), d.labels.begin(), d.labels.end());
    const auto twice = evaluate_population(m, cfg.mask, doubled, cfg, 0);
    REQUIRE(once.size() == twice.size());
    for (std::size_t i = 0; i < once.size(); ++i)
        CHECK(once[i] == Catch::Approx(twice[i]).margin(1e-15));
}

TEST_CASE("evaluate_population: brute-force oracle on the one-weight toy", "[trainer]") {
    const Model m = one_weight_model(0.5);
    const Dataset d = two_sample_data();
    const QFormat es = QFormat::sgn(12, 8);
    TrainConfig cfg;
    cfg.population = 2;
    cfg.sigma = 0.0625;
    cfg.seed = 91;
    cfg.mask = WeightMask{0, false, {0}};
    cfg.precision = Precision::fixed(es);
    const auto losses = evaluate_population(m, cfg.mask, d, cfg, 0);
    REQUIRE(losses.size() == 2);
    for (int i = 0; i < 2; ++i) {
        // Rebuild member i by hand with the public operations.
        const Fixed eps = quantize(normal(cfg.seed, 0, i, 0), es);
        const auto pv = apply_perturbation(m, cfg.mask, {eps}, cfg.sigma);
        double want = 0;
        for (std::size_t s = 0; s < d.size(); ++s) {
            const auto out =
                model_forward(pv, {quantize(d.features[s], m.layers[0].in_fmt)});
            want += neg_mae_loss({out[0].value()}, 0, 1);
        }
        want /= double(d.size());
        CHECK(losses[i] == want);
    }
}

TEST_CASE("train: config validation", "[trainer]") {
    const Model m = one_weight_model(0.5);
    const Dataset d = two_sample_data();
    TrainConfig cfg;
    cfg.mask = WeightMask{0, false, {0}};
    cfg.iterations = 0;
    CHECK_THROWS_AS(train(m, d, cfg), std::invalid_argument);
    cfg.iterations = 1;
    cfg.population = 0;
    CHECK_THROWS_AS(train(m, d, cfg), std::invalid_argument);
    cfg.population = 1;
    cfg.sigma = 0;
    CHECK_THROWS_AS(train(m, d, cfg), std::invalid_argument);
    cfg.sigma = 0.1;
    cfg.precision = Precision::fixed(QFormat::sgn(12, 8));
    cfg.loss_quant = LossQuant::po2;
    cfg.alpha = 0.3;  // not a power of two
    CHECK_THROWS_AS(train(m, d, cfg), std::invalid_argument);
    cfg.alpha = 0.25;
    CHECK_NOTHROW(train(m, d, cfg));
}

TEST_CASE("train: zero-forced noise leaves weights unchanged", "[trainer]") {
    const Dataset d = blob_data(3, 6, 60, 11);
    const Model m = small_quant_model(6, 5, 3, 11);
    auto zero_noise = [](int, int, std::size_t) { return 0.0; };
    for (bool fixed : {true, false}) {
        TrainConfig cfg;
        cfg.population = 4;
        cfg.iterations = 3;
        cfg.sigma = 0.0625;
        cfg.alpha = 0.25;
        cfg.mask = WeightMask{0, true, {}};
        cfg.precision = fixed ? Precision::fixed(QFormat::sgn(12, 8)) : Precision::float_ref();
        cfg.loss_quant = fixed ? LossQuant::po2 : LossQuant::exact;
        const auto res = train(m, d, cfg, zero_noise);
        // Compare against the t=0 promotion of the same model.
        Trainer fresh(m, d, cfg, zero_noise);
        CHECK(serialize_model(res.model) == serialize_model(fresh.current_model()));
    }
}

TEST_CASE("train: forward-pass accounting is exact", "[trainer]") {
    const Dataset d = blob_data(3, 6, 120, 7);
    const Model m = small_quant_model(6, 5, 3, 7);
    TrainConfig cfg;
    cfg.population = 7;
    cfg.iterations = 9;
    cfg.sigma = 0.0625;
    cfg.alpha = 0.0078125;
    cfg.mask = WeightMask{0, true, {}};
    cfg.precision = Precision::fixed(QFormat::sgn(12, 8));
    const auto res = train(m, d, cfg);
    CHECK(res.forward_passes == 120ull * 7 * 9);
    CHECK(res.history.size() == 9);
    CHECK(res.history.back().forward_passes == res.forward_passes);
}

TEST_CASE("train: deterministic across worker counts", "[trainer]") {
    const Dataset d = blob_data(4, 8, 160, 3);
    const Model m = small_quant_model(8, 6, 4, 3);
    for (bool fixed : {true, false}) {
        TrainConfig cfg;
        cfg.population = 6;
        cfg.iterations = 4;
        cfg.sigma = 0.0625;
        cfg.alpha = 0.0078125;
        cfg.seed = 17;
        cfg.mask = WeightMask{0, true, {}};
        cfg.precision = fixed ? Precision::fixed(QFormat::sgn(12, 8)) : Precision::float_ref();
        cfg.workers = 1;
        const auto a = train(m, d, cfg);
        cfg.workers = 5;
        const auto b = train(m, d, cfg);
        CHECK(serialize_model(a.model) == serialize_model(b.model));
        REQUIRE(a.history.size() == b.history.size());
        for (std::size_t i = 0; i < a.history.size(); ++i)
            CHECK(a.history[i].mean_loss == b.history[i].mean_loss);
    }
}

TEST_CASE("suspend/resume: trajectory is bit-identical", "[trainer]") {
    const Dataset d = blob_data(4, 8, 120, 23);
    const Model m = small_quant_model(8, 6, 4, 23);
    for (bool fixed : {true, false}) {
        TrainConfig cfg;
        cfg.population = 5;
        cfg.iterations = 8;
        cfg.sigma = 0.0625;
        cfg.alpha = 0.0078125;
        cfg.seed = 29;
        cfg.mask = WeightMask{0, true, {}};
        cfg.precision = fixed ? Precision::fixed(QFormat::sgn(12, 8)) : Precision::float_ref();

        Trainer uninterrupted(m, d, cfg);
        uninterrupted.run();

        Trainer first_half(m, d, cfg);
        while (first_half.t() < 4) first_half.step();
        const auto blob = first_half.suspend();
        Trainer resumed = Trainer::resume(blob, m, d);
        CHECK(resumed.t() == 4);
        resumed.run();

        CHECK(serialize_model(uninterrupted.current_model()) ==
              serialize_model(resumed.current_model()));
        CHECK(uninterrupted.forward_passes() == resumed.forward_passes());
        REQUIRE(uninterrupted.history().size() == resumed.history().size());
        for (std::size_t i = 0; i < resumed.history().size(); ++i)
            CHECK(uninterrupted.history()[i].mean_loss == resumed.history()[i].mean_loss);
    }
}

TEST_CASE("suspend at t=0 resumes into a fresh run", "[trainer]") {
    const Dataset d = blob_data(3, 6, 80, 31);
    const Model m = small_quant_model(6, 5, 3, 31);
    TrainConfig cfg;
    cfg.population = 4;
    cfg.iterations = 3;
    cfg.sigma = 0.0625;
    cfg.alpha = 0.0078125;
    cfg.mask = WeightMask{0, true, {}};
    cfg.precision = Precision::fixed(QFormat::sgn(12, 8));

    Trainer t0(m, d, cfg);
    const auto blob = t0.suspend();
    Trainer resumed = Trainer::resume(blob, m, d);
    resumed.run();
    const auto fresh = train(m, d, cfg);
    CHECK(serialize_model(resumed.current_model()) == serialize_model(fresh.model));
}

TEST_CASE("resume: mismatched model/blob rejected", "[trainer]") {
    const Dataset d = blob_data(3, 6, 80, 37);
    const Model m = small_quant_model(6, 5, 3, 37);
    TrainConfig cfg;
    cfg.population = 2;
    cfg.iterations = 2;
    cfg.sigma = 0.0625;
    cfg.alpha = 0.0078125;
    cfg.mask = WeightMask{0, true, {}};
    cfg.precision = Precision::fixed(QFormat::sgn(12, 8));
    Trainer tr(m, d, cfg);
    tr.step();
    auto blob = tr.suspend();

    const Model other = small_quant_model(6, 4, 3, 41);  // different shape
    try {
        Trainer::resume(blob, other, d);
        FAIL("expected StateError");
    } catch (const StateError& e) {
        CHECK(e.kind == StateError::Kind::mismatch);
    }

    auto corrupted = blob;
    corrupted[corrupted.size() / 2] ^= 0x40;
    CHECK_THROWS_AS(Trainer::resume(corrupted, m, d), StateError);

    auto truncated = blob;
    truncated.resize(truncated.size() - 5);
    CHECK_THROWS_AS(Trainer::resume(truncated, m, d), StateError);
}

TEST_CASE("es_optimize: quadratic reward converges to the optimum", "[trainer]") {
    // Reward -(w - c)^2. The analytic-gradient ascent oracle converges to
    // c; the population estimate must land within 0.05 of it.
    const double c = 0.7;
    auto reward = [&](const std::vector<double>& w) {
        return -(w[0] - c) * (w[0] - c);
    };
    const auto [w, hist] = es_optimize(reward, {0.0}, 500, 50, 0.1, 0.05, 1234);

    double oracle = 0.0;
    for (int t = 0; t < 50; ++t) oracle += 0.05 * (-2.0 * (oracle - c));
    CHECK(std::fabs(oracle - c) < 0.01);
    CHECK(std::fabs(w[0] - oracle) <= 0.05);
    CHECK(std::fabs(w[0] - c) <= 0.05);
    // Mean reward improves over the run.
    CHECK(hist.back() > hist.front());
}

TEST_CASE("train: reward ascends on a separable toy", "[trainer]") {
    const Dataset d = blob_data(3, 8, 150, 57);
    Model m = make_model({8, 3}, QuantSpec{});  // zero weights: everything to learn
    TrainConfig cfg;
    cfg.population = 40;
    cfg.iterations = 40;
    cfg.sigma = 0.0625;
    cfg.alpha = 0.03125;
    cfg.seed = 3;
    cfg.mask = WeightMask{0, true, {}};
    cfg.precision = Precision::fixed(QFormat::sgn(12, 8));
    const auto res = train(m, d, cfg);
    CHECK(res.history.back().mean_loss > res.history.front().mean_loss);
}
