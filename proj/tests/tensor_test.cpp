#include <doctest.h>

#include <cmath>
#include <cstring>

#include "mdmlp/errors.hpp"
#include "mdmlp/gradcheck.hpp"
#include "mdmlp/tape.hpp"

using namespace mdmlp;

namespace {

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data().data(), b.data().data(), sizeof(double) * a.data().size()) == 0;
}

// Draw entries away from the kinks of softshrink/leaky_relu/abs so central
// differences stay valid.
Tensor away_from(Rng& rng, Shape shape, double kink, double margin) {
    Tensor t = Tensor::zeros(shape);
    for (auto& v : t.mut()) {
        do {
            v = rng.uniform(-2.0, 2.0);
        } while (std::fabs(std::fabs(v) - kink) < margin || std::fabs(v) < margin);
    }
    return t;
}

} // namespace

TEST_SUITE_BEGIN("tensor");

TEST_CASE("rng determinism and distribution") {
    Rng a(42), b(42), c(7);
    bool same = true, diff = false;
    for (int i = 0; i < 64; ++i) {
        auto x = a.next_u64();
        same = same && (x == b.next_u64());
        diff = diff || (x != c.next_u64());
    }
    CHECK(same);
    CHECK(diff);

    Rng u(3);
    double acc = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double v = u.uniform();
        REQUIRE(v >= 0.0);
        REQUIRE(v < 1.0);
        acc += v;
    }
    CHECK(acc / 10000.0 == doctest::Approx(0.5).epsilon(0.05));

    Rng n(4);
    double mean = 0.0, sq = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double v = n.normal();
        mean += v;
        sq += v * v;
    }
    CHECK(std::fabs(mean / 10000.0) < 0.05);
    CHECK(sq / 10000.0 == doctest::Approx(1.0).epsilon(0.05));

    Rng bd(5);
    for (int i = 0; i < 1000; ++i) CHECK(bd.below(7) < 7);

    // substreams decorrelate from the parent stream
    Rng parent(6);
    Rng sub = parent.split();
    bool stream_differs = false;
    for (int i = 0; i < 16; ++i) stream_differs = stream_differs || sub.next_u64() != parent.next_u64();
    CHECK(stream_differs);
}

TEST_CASE("tensor shape contracts") {
    CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
    Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.size() == 6);
    CHECK(t.at({1, 2}) == 6.0);
    CHECK_THROWS_AS(t.reshaped({4, 2}), DimensionError);
    Tensor v = t.reshaped({3, 2});
    CHECK(v.at({2, 1}) == 6.0);
    CHECK_THROWS_AS(Tensor::from({2}, {1.0, 2.0}).item(), ContractError);
}

TEST_CASE("matmul identity, hand product, zeros") {
    Tape t;
    Rng rng(1);
    Tensor m = Tensor::uniform({3, 3}, rng, -1.0, 1.0);
    Tensor eye = Tensor::zeros({3, 3});
    for (int i = 0; i < 3; ++i) eye.mut()[static_cast<std::size_t>(i * 3 + i)] = 1.0;

    Value prod = t.matmul(t.constant(eye), t.constant(m));
    CHECK(bitwise_equal(prod.tensor(), m));

    Value hand = t.matmul(t.constant(Tensor::from({2, 2}, {1, 2, 3, 4})),
                          t.constant(Tensor::from({2, 1}, {1, 1})));
    CHECK(hand.tensor().at({0, 0}) == 3.0);
    CHECK(hand.tensor().at({1, 0}) == 7.0);

    Value zero = t.matmul(t.constant(Tensor::zeros({2, 3})),
                          t.constant(Tensor::uniform({3, 2}, rng, -1.0, 1.0)));
    for (double v : zero.tensor().data()) CHECK(v == 0.0);

    CHECK_THROWS_AS(t.matmul(t.constant(Tensor::zeros({2, 3})), t.constant(Tensor::zeros({2, 3}))),
                    DimensionError);
}

TEST_CASE("activation closed-form points") {
    Tape t;
    Value x = t.constant(Tensor::from({5}, {0.0, 0.6, -0.2, -1.0, 2.0}));
    CHECK(t.activation(Activation::Tanh, x).tensor().at({0}) == 0.0);
    CHECK(t.activation(Activation::Sigmoid, x).tensor().at({0}) == 0.5);

    const Tensor ss = t.activation(Activation::Softshrink, x, 0.5).tensor();
    CHECK(ss.at({1}) == doctest::Approx(0.1));
    CHECK(ss.at({2}) == 0.0);

    const Tensor lr = t.activation(Activation::LeakyRelu, x, 0.01).tensor();
    CHECK(lr.at({3}) == doctest::Approx(-0.01));
    CHECK(lr.at({4}) == 2.0);
    const Tensor lr2 = t.activation(Activation::LeakyRelu, x, 0.2).tensor();
    CHECK(lr2.at({3}) == doctest::Approx(-0.2));

    CHECK_THROWS_AS(t.activation(Activation::Softshrink, x, -0.1), ConfigError);

    const Tensor ge = t.activation(Activation::Gelu, x).tensor();
    const double v = 2.0;
    const double u = std::sqrt(2.0 / M_PI) * (v + 0.044715 * v * v * v);
    CHECK(ge.at({4}) == doctest::Approx(0.5 * v * (1.0 + std::tanh(u))));
    const Tensor gx = t.activation(Activation::GeluExact, x).tensor();
    CHECK(gx.at({4}) == doctest::Approx(v * 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)))));
}

TEST_CASE("dropout identity, scaling, mean preservation") {
    Tape t;
    Rng rng(9);
    Tensor ones = Tensor::full({100000}, 1.0);
    Value x = t.constant(ones);

    Value same_p0 = t.dropout(x, 0.0, rng, true);
    CHECK(same_p0.id == x.id);
    Value same_eval = t.dropout(x, 0.5, rng, false);
    CHECK(same_eval.id == x.id);

    Value dropped = t.dropout(x, 0.5, rng, true);
    double acc = 0.0;
    for (double v : dropped.tensor().data()) {
        CHECK((v == 0.0 || v == 2.0));
        acc += v;
    }
    CHECK(acc / 100000.0 == doctest::Approx(1.0).epsilon(0.02));

    CHECK_THROWS_AS(t.dropout(x, 1.0, rng, true), ConfigError);
    CHECK_THROWS_AS(t.dropout(x, -0.1, rng, true), ConfigError);

    Rng r1(5), r2(5);
    Tape t2;
    Value a = t2.dropout(t2.constant(ones), 0.3, r1, true);
    Value b = t2.dropout(t2.constant(ones), 0.3, r2, true);
    CHECK(bitwise_equal(a.tensor(), b.tensor()));
}

TEST_CASE("backward basics") {
    SUBCASE("sum gives ones") {
        Tape t;
        Value w = t.leaf(Tensor::from({3}, {1, 2, 3}), true);
        Gradients g = t.backward(t.sum(w));
        for (double v : g.at(w).data()) CHECK(v == 1.0);
    }
    SUBCASE("sum of squares") {
        Tape t;
        Value w = t.leaf(Tensor::from({2}, {1, 2}), true);
        Gradients g = t.backward(t.sum(t.mul(w, w)));
        CHECK(g.at(w).at({0}) == doctest::Approx(2.0));
        CHECK(g.at(w).at({1}) == doctest::Approx(4.0));
    }
    SUBCASE("non-participating leaf gets zeros") {
        Tape t;
        Value w = t.leaf(Tensor::from({2}, {1, 2}), true);
        Value other = t.leaf(Tensor::from({2}, {5, 5}), true);
        Gradients g = t.backward(t.sum(t.mul(other, other)));
        for (double v : g.at(w).data()) CHECK(v == 0.0);
    }
    SUBCASE("non-scalar loss rejected") {
        Tape t;
        Value w = t.leaf(Tensor::from({2}, {1, 2}), true);
        CHECK_THROWS_AS(t.backward(t.mul(w, w)), ContractError);
    }
}

TEST_CASE("backward touches each node exactly once") {
    Tape t;
    Value x = t.leaf(Tensor::from({4}, {0.1, -0.4, 0.7, 0.2}), true);
    Value a = t.activation(Activation::Tanh, x);
    Value b = t.mul(x, x);
    Value c = t.add(a, b);
    Value s = t.sum(c);
    CHECK(t.node_count() == 5);
    Gradients g = t.backward(s);
    CHECK(t.backward_visits() == 5);
    for (int i = 0; i < 4; ++i) {
        const double xv = x.tensor().at({i});
        const double th = std::tanh(xv);
        CHECK(g.at(x).at({i}) == doctest::Approx(1.0 - th * th + 2.0 * xv).epsilon(1e-12));
    }
}

TEST_CASE("finite_diff_check reference functions") {
    Rng rng(11);
    Tensor x = Tensor::uniform({4, 3}, rng, -1.0, 1.0);
    const double e1 =
        finite_diff_check([](Tape& t, Value v) { return t.sum(t.mul(v, v)); }, x, 1e-5);
    CHECK(e1 < 1e-6);
    const double e2 = finite_diff_check(
        [](Tape& t, Value v) { return t.sum(t.activation(Activation::Tanh, v)); }, x, 1e-5);
    CHECK(e2 < 1e-5);
}

TEST_CASE("every primitive passes gradient checks at 100 random points") {
    const double eps = 1e-5, tol = 1e-4;
    int checked = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        Rng rng(seed);
        Tensor x = Tensor::uniform({3, 4}, rng, -2.0, 2.0);
        Tensor y = Tensor::uniform({3, 4}, rng, -2.0, 2.0);
        Tensor w = Tensor::uniform({4, 2}, rng, -1.0, 1.0);
        Tensor vec = Tensor::uniform({4}, rng, -1.0, 1.0);
        Tensor cat_w = Tensor::uniform({3, 8}, rng, -1.0, 1.0);

        auto chk = [&](const ScalarFn& f, const Tensor& at) {
            CHECK(finite_diff_check(f, at, eps) < tol);
            ++checked;
        };
        chk([&](Tape& t, Value v) { return t.sum(t.matmul(v, t.constant(w))); }, x);
        chk([&](Tape& t, Value v) { return t.sum(t.matmul(t.constant(x), v)); }, w);
        chk([&](Tape& t, Value v) { return t.mean(t.add(v, t.constant(y))); }, x);
        chk([&](Tape& t, Value v) { return t.mean(t.sub(t.constant(y), v)); }, x);
        chk([&](Tape& t, Value v) { return t.sum(t.mul(v, t.constant(y))); }, x);
        chk([&](Tape& t, Value v) { return t.sum(t.scale(v, -2.5)); }, x);
        chk([&](Tape& t, Value v) { return t.sum(t.add_rowvec(t.constant(x), v)); }, vec);
        chk([&](Tape& t, Value v) { return t.sum(t.mul_rowvec(t.constant(x), v)); }, vec);
        chk([&](Tape& t, Value v) { return t.sum(t.mul_rowvec(v, t.constant(vec))); }, x);
        chk([&](Tape& t, Value v) { return t.sum(t.mul(t.transpose(v), t.transpose(v))); }, x);
        chk([&](Tape& t, Value v) {
            return t.sum(t.mul(t.reshape(v, {2, 6}), t.reshape(v, {2, 6})));
        }, x);
        chk([&](Tape& t, Value v) { return t.sum(t.slice_last(v, 1, 3)); }, x);
        chk([&](Tape& t, Value v) {
            return t.sum(t.mul(t.concat_cols(v, v), t.constant(cat_w)));
        }, x);
        chk([&](Tape& t, Value v) { return t.sum(t.mul(t.mean_rows(v), t.mean_rows(v))); }, x);
        chk([&](Tape& t, Value v) { return t.sum(t.mean_mid3(t.reshape(v, {2, 2, 3}))); }, x);
        chk([&](Tape& t, Value v) {
            return t.sum(t.mul(t.repeat_mid3(v, 3), t.repeat_mid3(v, 3)));
        }, x);
        chk([&](Tape& t, Value v) { return t.sum(t.tile_leading(v, 2)); }, x);
        chk([&](Tape& t, Value v) { return t.sum(t.activation(Activation::Tanh, v)); }, x);
        chk([&](Tape& t, Value v) { return t.sum(t.activation(Activation::Gelu, v)); }, x);
        chk([&](Tape& t, Value v) { return t.sum(t.activation(Activation::GeluExact, v)); }, x);
        chk([&](Tape& t, Value v) { return t.sum(t.activation(Activation::Sigmoid, v)); }, x);
        chk([&](Tape& t, Value v) { return t.sum(t.atan(v)); }, x);
        chk([&](Tape& t, Value v) {
            return t.sum(t.recip(t.add(t.mul(v, v), t.constant(Tensor::full({3, 4}, 1.0)))));
        }, x);
        chk([&](Tape& t, Value v) { return t.sum(t.value_embed(v, t.constant(vec))); }, x);
        chk([&](Tape& t, Value v) {
            return t.sum(t.mul(t.value_embed(t.constant(x), v), t.value_embed(t.constant(x), v)));
        }, vec);
        chk([&](Tape& t, Value v) {
            return t.sum(t.mul(t.transpose_last2(t.reshape(v, {2, 2, 3})),
                               t.transpose_last2(t.reshape(v, {2, 2, 3}))));
        }, x);

        Tensor xk = away_from(rng, {3, 4}, 0.3, 1e-3);
        chk([&](Tape& t, Value v) { return t.sum(t.activation(Activation::LeakyRelu, v, 0.07)); }, xk);
        chk([&](Tape& t, Value v) { return t.sum(t.activation(Activation::Softshrink, v, 0.3)); }, xk);
        chk([&](Tape& t, Value v) { return t.sum(t.abs(v)); }, xk);
    }
    CHECK(checked == 29 * 100);
}

TEST_CASE("dropout gradient applies the saved mask") {
    Rng rng(3);
    Tensor x = Tensor::uniform({50}, rng, -1.0, 1.0);
    Tape t;
    Rng drop_rng(77);
    Value v = t.leaf(x, true);
    Value d = t.dropout(v, 0.4, drop_rng, true);
    Gradients g = t.backward(t.sum(d));
    auto out = d.tensor().data();
    auto grad = g.at(v).data();
    auto in = x.data();
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (out[i] == 0.0 && in[i] != 0.0) CHECK(grad[i] == 0.0);
        else CHECK(grad[i] == doctest::Approx(1.0 / 0.6));
    }
}

TEST_SUITE_END();
