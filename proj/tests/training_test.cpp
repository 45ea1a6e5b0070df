#include <doctest.h>

#include <cmath>
#include <cstring>

#include "mdmlp/errors.hpp"
#include "mdmlp/training.hpp"

using namespace mdmlp;

namespace {

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data().data(), b.data().data(), sizeof(double) * a.data().size()) == 0;
}

// Slow drifting level plus a small cycle; easy for a tiny model to improve on.
Tensor linear_trend_series(std::int64_t samples, std::int64_t channels, std::uint64_t seed) {
    Rng rng(seed);
    Tensor out = Tensor::zeros({samples, channels});
    auto m = out.mut();
    for (std::int64_t c = 0; c < channels; ++c)
        for (std::int64_t t = 0; t < samples; ++t)
            m[t * channels + c] = 0.01 * static_cast<double>(t) +
                                  0.5 * std::sin(2.0 * M_PI * static_cast<double>(t) / 24.0 +
                                                 static_cast<double>(c)) +
                                  0.05 * rng.normal();
    return out;
}

ModelConfig small_model(std::int64_t l, std::int64_t q, std::int64_t c) {
    ModelConfig cfg;
    cfg.lookback = l;
    cfg.horizon = q;
    cfg.channels = c;
    cfg.base_neurons = 16;
    return cfg;
}

} // namespace

TEST_SUITE_BEGIN("training");

TEST_CASE("loss closed forms") {
    Tensor a = Tensor::from({2, 1}, {0.0, 2.0});
    Tensor b = Tensor::from({2, 1}, {1.0, 1.0});
    CHECK(loss_eval(a, a, LossKind::Mse) == 0.0);
    CHECK(loss_eval(a, a, LossKind::Mae) == 0.0);
    CHECK(loss_eval(a, a, LossKind::Arctan) == 0.0);
    CHECK(loss_eval(a, b, LossKind::Mse) == doctest::Approx(1.0));
    CHECK(loss_eval(a, b, LossKind::Mae) == doctest::Approx(1.0));
    CHECK(loss_eval(a, b, LossKind::Arctan) == doctest::Approx(M_PI / 4.0));
    CHECK_THROWS_AS(loss_eval(a, Tensor::zeros({3, 1}), LossKind::Mse), DimensionError);

    Tape t;
    Value pred = t.leaf(a, true);
    Value target = t.constant(b);
    for (auto kind : {LossKind::Mse, LossKind::Mae, LossKind::Arctan}) {
        Value l = loss_value(t, pred, target, kind);
        CHECK(l.tensor().item() == doctest::Approx(loss_eval(a, b, kind)));
    }
    CHECK_THROWS_AS(loss_value(t, pred, t.constant(Tensor::zeros({3, 1})), LossKind::Mse),
                    DimensionError);
    CHECK(loss_from_string("arctan") == LossKind::Arctan);
    CHECK_THROWS_AS(loss_from_string("huber"), ConfigError);
}

TEST_CASE("sigmoid learning-rate schedule") {
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.base_lr = 0.01;
    cfg.lr_k = 1.0;
    cfg.lr_w = 10.0;
    CHECK(lr_at(10, cfg) == doctest::Approx(0.005));
    CHECK(lr_at(0, cfg) == doctest::Approx(0.01 / (1.0 + std::exp(-10.0))).epsilon(1e-12));
    CHECK(lr_at(0, cfg) == doctest::Approx(0.0099995).epsilon(1e-4));

    double prev = lr_at(0, cfg);
    for (int e = 1; e <= 60; ++e) {
        const double v = lr_at(e, cfg);
        CHECK(v <= prev);
        prev = v;
    }
    CHECK(lr_at(60, cfg) < 1e-10);
    CHECK_THROWS_AS(lr_at(-1, cfg), ContractError);

    TrainConfig def;
    def.epochs = 30;
    CHECK(def.resolved_lr_w() == 15.0);
    def.lr_w = 4.0;
    CHECK(def.resolved_lr_w() == 4.0);
}

TEST_CASE("optimizer update rules") {
    SUBCASE("zero gradient and zero decay is the identity") {
        Tensor p = Tensor::from({3}, {1.0, -2.0, 0.5});
        Tensor orig = p.clone();
        AdamW opt;
        std::vector<Tensor> grads{Tensor::zeros({3})};
        std::vector<std::pair<std::string, Tensor*>> params{{"p", &p}};
        opt.step(params, grads, 0.1, 0.0);
        CHECK(bitwise_equal(p, orig));
    }
    SUBCASE("bias-corrected first step moves by about the learning rate") {
        Tensor p = Tensor::from({1}, {0.7});
        AdamW opt;
        std::vector<Tensor> grads{Tensor::from({1}, {1.0})};
        std::vector<std::pair<std::string, Tensor*>> params{{"p", &p}};
        const double lr = 0.05;
        opt.step(params, grads, lr, 0.0);
        const double expected = 0.7 - lr * 1.0 / (1.0 + 1e-8);
        CHECK(p.at({0}) == doctest::Approx(expected).epsilon(1e-14));
    }
    SUBCASE("decay only scales the parameter") {
        Tensor p = Tensor::from({2}, {2.0, -4.0});
        AdamW opt;
        std::vector<Tensor> grads{Tensor::zeros({2})};
        std::vector<std::pair<std::string, Tensor*>> params{{"p", &p}};
        opt.step(params, grads, 0.1, 0.01);
        CHECK(p.at({0}) == doctest::Approx(2.0 * (1.0 - 0.1 * 0.01)).epsilon(1e-15));
        CHECK(p.at({1}) == doctest::Approx(-4.0 * (1.0 - 0.1 * 0.01)).epsilon(1e-15));
    }
    SUBCASE("non-finite gradients abort with the step index") {
        Tensor p = Tensor::from({1}, {1.0});
        AdamW opt;
        std::vector<Tensor> grads{Tensor::from({1}, {std::nan("")})};
        std::vector<std::pair<std::string, Tensor*>> params{{"p", &p}};
        try {
            opt.step(params, grads, 0.1, 0.0);
            FAIL("expected TrainingError");
        } catch (const TrainingError& e) {
            CHECK(std::string(e.what()).find("step 1") != std::string::npos);
        }
    }
}

TEST_CASE("global norm clipping") {
    std::vector<Tensor> grads{Tensor::from({2}, {3.0, 0.0}), Tensor::from({1}, {4.0})};
    clip_global_norm(grads, 10.0);
    CHECK(grads[0].at({0}) == 3.0);
    clip_global_norm(grads, 2.5);
    CHECK(grads[0].at({0}) == doctest::Approx(1.5));
    CHECK(grads[1].at({0}) == doctest::Approx(2.0));
    TrainConfig c;
    c.loss = LossKind::Mse;
    CHECK(c.resolved_clip() == 0.0);
    c.loss = LossKind::Arctan;
    CHECK(c.resolved_clip() == 5.0);
    c.clip_norm = 1.0;
    CHECK(c.resolved_clip() == 1.0);
}

TEST_CASE("batched gradients equal the gradient of the mean loss") {
    ModelConfig cfg = small_model(8, 4, 2);
    cfg.dropout_trend = cfg.dropout_strong = cfg.dropout_weak = cfg.dropout_eia = 0.0;
    Rng rng(3);
    ModelParams params = init_params(cfg, rng);
    Tensor xs = Tensor::uniform({3, 8, 2}, rng, -1.0, 1.0);
    Tensor ys = Tensor::uniform({3, 4, 2}, rng, -1.0, 1.0);

    Tape bt;
    Rng br(0);
    ForwardGraph bg = build_forward(bt, xs, params, cfg, br, false, true);
    Gradients bgr = bt.backward(loss_value(bt, bg.y, bt.constant(ys), LossKind::Mse));

    std::vector<Tensor> mean_grads;
    for (std::int64_t s = 0; s < 3; ++s) {
        Tensor x = Tensor::zeros({1, 8, 2});
        Tensor y = Tensor::zeros({1, 4, 2});
        std::memcpy(x.mut().data(), xs.data().data() + s * 16, 16 * sizeof(double));
        std::memcpy(y.mut().data(), ys.data().data() + s * 8, 8 * sizeof(double));
        Tape t;
        Rng r(0);
        ForwardGraph g = build_forward(t, x, params, cfg, r, false, true);
        Gradients gr = t.backward(loss_value(t, g.y, t.constant(y), LossKind::Mse));
        for (std::size_t i = 0; i < g.params.size(); ++i) {
            Tensor gi = gr.at(g.params[i].second).clone();
            if (mean_grads.size() <= i) {
                mean_grads.push_back(gi);
            } else {
                auto d = mean_grads[i].mut();
                auto src = gi.data();
                for (std::size_t j = 0; j < d.size(); ++j) d[j] += src[j];
            }
        }
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < mean_grads.size(); ++i) {
        auto avg = mean_grads[i].mut();
        auto batched = bgr.at(bg.params[i].second).data();
        for (std::size_t j = 0; j < avg.size(); ++j)
            worst = std::max(worst, std::fabs(avg[j] / 3.0 - batched[j]));
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("training improves the loss on a learnable series") {
    Tensor series = linear_trend_series(240, 2, 5);
    SplitSeries splits = split_dataset(series, {0.7, 0.2, 0.1}, 16, 4);
    standardize_global(splits);
    WindowedDataset train_w = make_windows(splits.train, 16, 4, 1, "train");
    WindowedDataset val_w = make_windows(splits.val, 16, 4, 1, "val");

    ModelConfig mcfg = small_model(16, 4, 2);
    TrainConfig tcfg;
    tcfg.epochs = 5;
    tcfg.patience = 5;
    tcfg.batch_size = 16;
    tcfg.base_lr = 2e-3;
    tcfg.seed = 7;

    TrainResult r = train_model(train_w, val_w, mcfg, tcfg);
    REQUIRE(r.history.size() == 5);
    for (std::size_t e = 1; e < r.history.size(); ++e)
        CHECK(r.history[e].train_loss < r.history[e - 1].train_loss);
}

TEST_CASE("frozen model stops after exactly patience plus one epochs") {
    Tensor series = linear_trend_series(200, 1, 8);
    SplitSeries splits = split_dataset(series, {0.7, 0.2, 0.1}, 12, 3);
    standardize_global(splits);
    WindowedDataset train_w = make_windows(splits.train, 12, 3, 1, "train");
    WindowedDataset val_w = make_windows(splits.val, 12, 3, 1, "val");

    ModelConfig mcfg = small_model(12, 3, 1);
    TrainConfig tcfg;
    tcfg.epochs = 10;
    tcfg.patience = 1;
    tcfg.base_lr = 0.0; // frozen
    tcfg.seed = 1;
    TrainResult r = train_model(train_w, val_w, mcfg, tcfg);
    CHECK(r.history.size() == 2);
    CHECK(r.best_epoch == 0);
}

TEST_CASE("identical seeds reproduce the run bitwise") {
    Tensor series = linear_trend_series(220, 2, 9);
    SplitSeries splits = split_dataset(series, {0.7, 0.2, 0.1}, 12, 4);
    standardize_global(splits);
    WindowedDataset train_w = make_windows(splits.train, 12, 4, 1, "train");
    WindowedDataset val_w = make_windows(splits.val, 12, 4, 1, "val");

    ModelConfig mcfg = small_model(12, 4, 2);
    mcfg.dropout_trend = mcfg.dropout_strong = mcfg.dropout_weak = mcfg.dropout_eia = 0.1;
    TrainConfig tcfg;
    tcfg.epochs = 3;
    tcfg.batch_size = 8;
    tcfg.seed = 11;

    TrainResult a = train_model(train_w, val_w, mcfg, tcfg);
    TrainResult b = train_model(train_w, val_w, mcfg, tcfg);
    CHECK(history_csv(a.history) == history_csv(b.history));
    auto ea = a.params.entries();
    auto eb = b.params.entries();
    REQUIRE(ea.size() == eb.size());
    for (std::size_t i = 0; i < ea.size(); ++i) CHECK(bitwise_equal(*ea[i].second, *eb[i].second));

    TrainConfig other = tcfg;
    other.seed = 12;
    TrainResult c = train_model(train_w, val_w, mcfg, other);
    CHECK(history_csv(a.history) != history_csv(c.history));
}

TEST_CASE("returned parameters achieve the minimum recorded validation loss") {
    Tensor series = linear_trend_series(240, 2, 10);
    SplitSeries splits = split_dataset(series, {0.7, 0.2, 0.1}, 12, 4);
    standardize_global(splits);
    WindowedDataset train_w = make_windows(splits.train, 12, 4, 1, "train");
    WindowedDataset val_w = make_windows(splits.val, 12, 4, 1, "val");

    ModelConfig mcfg = small_model(12, 4, 2);
    TrainConfig tcfg;
    tcfg.epochs = 6;
    tcfg.patience = 6;
    tcfg.batch_size = 16;
    tcfg.base_lr = 5e-3;
    tcfg.seed = 3;
    TrainResult r = train_model(train_w, val_w, mcfg, tcfg);

    double min_val = r.history.front().val_mse;
    for (const auto& rec : r.history) min_val = std::min(min_val, rec.val_mse);
    CHECK(r.best_val_mse == min_val);
    ForecastReport again = evaluate(r.params, val_w, mcfg);
    CHECK(again.mse == min_val);
}

TEST_CASE("evaluation metrics and statistical sanity") {
    Rng rng(21);
    Tensor targets = Tensor::zeros({100, 10, 10});
    for (auto& v : targets.mut()) v = rng.normal();
    Tensor zeros = Tensor::zeros({100, 10, 10});
    CHECK(loss_eval(targets, targets, LossKind::Mse) == 0.0);
    CHECK(loss_eval(zeros, targets, LossKind::Mse) == doctest::Approx(1.0).epsilon(0.1));

    Tensor series = linear_trend_series(160, 2, 13);
    SplitSeries splits = split_dataset(series, {0.7, 0.2, 0.1}, 10, 4);
    standardize_global(splits);
    WindowedDataset val_w = make_windows(splits.val, 10, 4, 1, "val");
    ModelConfig mcfg = small_model(10, 4, 2);
    Rng prng(2);
    ModelParams params = init_params(mcfg, prng);
    ForecastReport rep = evaluate(params, val_w, mcfg);
    CHECK(rep.windows == val_w.size());
    CHECK(rep.mse_per_step.size() == 4);
    CHECK(rep.mae_per_step.size() == 4);
    double acc = 0.0;
    for (double v : rep.mse_per_step) acc += v;
    CHECK(acc / 4.0 == doctest::Approx(rep.mse).epsilon(1e-9));
}

TEST_CASE("history csv formatting is stable") {
    std::vector<EpochRecord> h{{0, 0.5, 0.25, 0.375, 0.01}, {1, 0.25, 0.125, 0.375, 0.005}};
    const std::string csv = history_csv(h);
    CHECK(csv.find("epoch,train_loss,val_mse,val_mae,lr\n") == 0);
    CHECK(csv.find("0,0.5,0.25,0.375,0.01\n") != std::string::npos);
    CHECK(history_csv(h) == history_csv(h));
}

TEST_SUITE_END();
