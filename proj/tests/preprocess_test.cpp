#include <doctest.h>

#include <cmath>
#include <cstring>

#include "mdmlp/errors.hpp"
#include "mdmlp/preprocess.hpp"

using namespace mdmlp;

TEST_SUITE_BEGIN("preprocess");

TEST_CASE("revin hand example and degenerate channel") {
    auto [out, stats] = revin_normalize(Tensor::from({2, 1}, {1.0, 3.0}), 1e-5);
    CHECK(stats.mean.at({0}) == doctest::Approx(2.0));
    CHECK(stats.std.at({0}) == doctest::Approx(1.0));
    CHECK(out.at({0, 0}) == doctest::Approx(-1.0));
    CHECK(out.at({1, 0}) == doctest::Approx(1.0));

    auto [cz, cs] = revin_normalize(Tensor::from({3, 1}, {4.0, 4.0, 4.0}), 1e-5);
    CHECK(cs.std.at({0}) == 1e-5);
    for (double v : cz.data()) CHECK(v == 0.0);

    auto [fix, fs] = revin_normalize(Tensor::from({2, 1}, {-1.0, 1.0}), 1e-5);
    CHECK(fix.at({0, 0}) == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(fix.at({1, 0}) == doctest::Approx(1.0).epsilon(1e-9));

    CHECK_THROWS_AS(revin_normalize(Tensor::from({1, 1}, {2.0}), 1e-5), DimensionError);
}

TEST_CASE("revin denormalize inverts and maps zeros to the mean") {
    Rng rng(6);
    Tensor x = Tensor::uniform({16, 3}, rng, -2.0, 5.0);
    auto [norm, stats] = revin_normalize(x, 1e-5);
    Tensor back = revin_denormalize(norm, stats);
    auto a = x.data();
    auto b = back.data();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::fabs(a[i] - b[i]) < 1e-9);

    Tensor zeros = Tensor::zeros({4, 3});
    Tensor means = revin_denormalize(zeros, stats);
    for (std::int64_t q = 0; q < 4; ++q)
        for (std::int64_t c = 0; c < 3; ++c)
            CHECK(means.at({q, c}) == stats.mean.at({c}));

    RevinStats hand{Tensor::from({1}, {2.0}), Tensor::from({1}, {1.0}), 1e-5};
    Tensor res = revin_denormalize(Tensor::from({2, 1}, {-1.0, 1.0}), hand);
    CHECK(res.at({0, 0}) == 1.0);
    CHECK(res.at({1, 0}) == 3.0);
}

TEST_CASE("ema decomposition examples and invariants") {
    Tensor constant = Tensor::from({3, 2}, {5, -1, 5, -1, 5, -1});
    auto [tr, se] = ema_decompose(constant, 0.3);
    CHECK(std::memcmp(tr.data().data(), constant.data().data(), 6 * sizeof(double)) == 0);
    for (double v : se.data()) CHECK(v == 0.0);

    Rng rng(2);
    Tensor x = Tensor::uniform({20, 2}, rng, -1.0, 1.0);
    auto [t1, s1] = ema_decompose(x, 1.0);
    CHECK(std::memcmp(t1.data().data(), x.data().data(), 40 * sizeof(double)) == 0);
    for (double v : s1.data()) CHECK(v == 0.0);

    auto [t05, s05] = ema_decompose(Tensor::from({2, 1}, {0.0, 1.0}), 0.5);
    CHECK(t05.at({0, 0}) == 0.0);
    CHECK(t05.at({1, 0}) == 0.5);
    CHECK(s05.at({1, 0}) == 0.5);

    CHECK_THROWS_AS(ema_decompose(x, 0.0), ConfigError);
    CHECK_THROWS_AS(ema_decompose(x, 1.5), ConfigError);

    SUBCASE("trend plus seasonal reconstructs exactly") {
        auto [t, s] = ema_decompose(x, 0.3);
        for (std::int64_t i = 0; i < x.size(); ++i) {
            const double rebuilt = t.data()[static_cast<std::size_t>(i)] +
                                   s.data()[static_cast<std::size_t>(i)];
            CHECK(rebuilt == x.data()[static_cast<std::size_t>(i)]);
        }
    }
    SUBCASE("shift equivariance") {
        const double shift = 3.7;
        Tensor xs = x.clone();
        for (auto& v : xs.mut()) v += shift;
        auto [t0, s0] = ema_decompose(x, 0.3);
        auto [ts, ss] = ema_decompose(xs, 0.3);
        for (std::int64_t i = 0; i < x.size(); ++i) {
            CHECK(ts.data()[static_cast<std::size_t>(i)] ==
                  doctest::Approx(t0.data()[static_cast<std::size_t>(i)] + shift).epsilon(1e-12));
            CHECK(ss.data()[static_cast<std::size_t>(i)] ==
                  doctest::Approx(s0.data()[static_cast<std::size_t>(i)]).scale(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("batched preprocessing matches the per-sample path") {
    Rng rng(13);
    Tensor a = Tensor::uniform({12, 3}, rng, -1.0, 4.0);
    Tensor b = Tensor::uniform({12, 3}, rng, -2.0, 2.0);
    Tensor batch = Tensor::zeros({2, 12, 3});
    auto bm = batch.mut();
    for (std::int64_t i = 0; i < 36; ++i) {
        bm[static_cast<std::size_t>(i)] = a.data()[static_cast<std::size_t>(i)];
        bm[static_cast<std::size_t>(36 + i)] = b.data()[static_cast<std::size_t>(i)];
    }
    auto [bn, bs] = revin_normalize_batch(batch, 1e-5);
    auto [an, as] = revin_normalize(a, 1e-5);
    auto [tb, sb] = ema_decompose_batch(bn, 0.3);
    auto [ta, sa] = ema_decompose(an, 0.3);
    for (std::int64_t i = 0; i < 36; ++i) {
        CHECK(bn.data()[static_cast<std::size_t>(i)] == an.data()[static_cast<std::size_t>(i)]);
        CHECK(tb.data()[static_cast<std::size_t>(i)] == ta.data()[static_cast<std::size_t>(i)]);
        CHECK(sb.data()[static_cast<std::size_t>(i)] == sa.data()[static_cast<std::size_t>(i)]);
    }
    for (std::int64_t c = 0; c < 3; ++c) {
        CHECK(bs.mean.at({0, c}) == as.mean.at({c}));
        CHECK(bs.std.at({0, c}) == as.std.at({c}));
    }
}

TEST_CASE("split boundaries, prefixes and contract errors") {
    Rng rng(4);
    Tensor series = Tensor::uniform({100, 2}, rng, -1.0, 1.0);
    const std::int64_t lookback = 8, horizon = 4;
    SplitSeries s = split_dataset(series, {0.7, 0.2, 0.1}, lookback, horizon);
    CHECK(s.train.dim(0) == 70);
    CHECK(s.val.dim(0) == 20 + lookback);
    CHECK(s.test.dim(0) == 10 + lookback);
    // val starts exactly lookback rows before the 70 boundary
    for (std::int64_t c = 0; c < 2; ++c) {
        CHECK(s.val.at({0, c}) == series.at({70 - lookback, c}));
        CHECK(s.test.at({0, c}) == series.at({90 - lookback, c}));
        CHECK(s.train.at({69, c}) == series.at({69, c}));
    }

    CHECK_THROWS_AS(split_dataset(series, {0.7, 0.2, 0.2}, lookback, horizon), ConfigError);
    CHECK_THROWS_AS(split_dataset(series, {0.9, 0.05, 0.05}, lookback, 6), DataError);

    Tensor tiny = Tensor::uniform({12, 1}, rng, -1.0, 1.0);
    SplitSeries single = split_dataset(tiny, {1.0, 0.0, 0.0}, 8, 4);
    CHECK(single.train.dim(0) == 12);
    CHECK(single.val.empty());
    WindowedDataset w = make_windows(single.train, 8, 4);
    CHECK(w.size() == 1);
}

TEST_CASE("window counting and stride behavior") {
    Rng rng(7);
    Tensor series = Tensor::uniform({5, 1}, rng, -1.0, 1.0);
    CHECK(make_windows(series, 2, 1).size() == 3);

    Tensor longer = Tensor::uniform({30, 2}, rng, -1.0, 1.0);
    for (std::int64_t stride : {1, 2, 3, 5}) {
        const auto count = make_windows(longer, 6, 3, stride).size();
        CHECK(count == (30 - 6 - 3) / stride + 1);
    }

    WindowedDataset tiling = make_windows(longer, 4, 2, 6);
    for (std::int64_t i = 0; i + 1 < tiling.size(); ++i)
        CHECK(tiling.start(i + 1) - tiling.start(i) == 6);

    Tensor exact = Tensor::uniform({9, 1}, rng, -1.0, 1.0);
    CHECK(make_windows(exact, 6, 3).size() == 1);
    CHECK_THROWS_AS(make_windows(Tensor::uniform({8, 1}, rng, 0, 1), 6, 3), DataError);
}

TEST_CASE("windows are contiguous input/target pairs") {
    Rng rng(9);
    Tensor series = Tensor::uniform({40, 2}, rng, -1.0, 1.0);
    WindowedDataset w = make_windows(series, 5, 3);
    for (std::int64_t i : {std::int64_t(0), w.size() / 2, w.size() - 1}) {
        Tensor in = w.input(i);
        Tensor tg = w.target(i);
        for (std::int64_t r = 0; r < 5; ++r)
            for (std::int64_t c = 0; c < 2; ++c) CHECK(in.at({r, c}) == series.at({w.start(i) + r, c}));
        for (std::int64_t r = 0; r < 3; ++r)
            for (std::int64_t c = 0; c < 2; ++c)
                CHECK(tg.at({r, c}) == series.at({w.start(i) + 5 + r, c}));
    }
    auto [xs, ys] = w.gather({0, 7});
    CHECK(xs.shape() == Shape{2, 5, 2});
    CHECK(ys.shape() == Shape{2, 3, 2});
    CHECK(xs.at({1, 0, 0}) == series.at({7, 0}));
}

TEST_CASE("val and test targets never overlap the train region") {
    Rng rng(10);
    Tensor series = Tensor::uniform({120, 1}, rng, -1.0, 1.0);
    const std::int64_t lookback = 10, horizon = 5;
    SplitSeries s = split_dataset(series, {0.7, 0.2, 0.1}, lookback, horizon);
    WindowedDataset val = make_windows(s.val, lookback, horizon, 1, "val");
    // first val target row is series row 84 (the 0.7 boundary)
    CHECK(val.target(0).at({0, 0}) == series.at({84, 0}));
    WindowedDataset test = make_windows(s.test, lookback, horizon, 1, "test");
    CHECK(test.target(0).at({0, 0}) == series.at({108, 0}));
}

TEST_CASE("global standardization uses train statistics only") {
    Rng rng(11);
    const std::int64_t n = 10000;
    Tensor series = Tensor::zeros({n, 2});
    auto m = series.mut();
    for (std::int64_t t = 0; t < n; ++t) {
        m[static_cast<std::size_t>(t * 2)] = 5.0 + 2.0 * rng.normal();
        m[static_cast<std::size_t>(t * 2 + 1)] = -1.0 + 0.5 * rng.normal();
    }
    SplitSeries s = split_dataset(series, {0.7, 0.2, 0.1}, 8, 4);
    Tensor test_before = s.test.clone();
    StandardizeStats stats = standardize_global(s);

    double mean0 = 0.0, var0 = 0.0;
    const auto rows = s.train.dim(0);
    for (std::int64_t t = 0; t < rows; ++t) mean0 += s.train.at({t, 0});
    mean0 /= static_cast<double>(rows);
    for (std::int64_t t = 0; t < rows; ++t) {
        const double d = s.train.at({t, 0}) - mean0;
        var0 += d * d;
    }
    var0 /= static_cast<double>(rows);
    CHECK(mean0 == doctest::Approx(0.0).scale(1.0).epsilon(0.05));
    CHECK(std::sqrt(var0) == doctest::Approx(1.0).epsilon(0.05));

    for (std::int64_t t : {std::int64_t(0), s.test.dim(0) - 1}) {
        const double expect = (test_before.at({t, 1}) - stats.mean.at({1})) / stats.std.at({1});
        CHECK(s.test.at({t, 1}) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("standardize clamps constant channels") {
    Tensor series = Tensor::zeros({50, 2});
    auto m = series.mut();
    Rng rng(12);
    for (std::int64_t t = 0; t < 50; ++t) {
        m[static_cast<std::size_t>(t * 2)] = 7.0; // constant
        m[static_cast<std::size_t>(t * 2 + 1)] = rng.uniform(-1.0, 1.0);
    }
    SplitSeries s = split_dataset(series, {0.7, 0.2, 0.1}, 4, 2);
    standardize_global(s);
    for (std::int64_t t = 0; t < s.train.dim(0); ++t) CHECK(s.train.at({t, 0}) == 0.0);
}

TEST_SUITE_END();
