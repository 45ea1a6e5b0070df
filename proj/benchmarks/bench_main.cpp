#include <benchmark/benchmark.h>

#include "mdmlp/fft.hpp"
#include "mdmlp/model.hpp"
#include "mdmlp/training.hpp"

namespace {

using namespace mdmlp;

void BM_Matmul(benchmark::State& state) {
    const auto n = state.range(0);
    Rng rng(1);
    Tensor a = Tensor::uniform({n, n}, rng, -1.0, 1.0);
    Tensor b = Tensor::uniform({n, n}, rng, -1.0, 1.0);
    for (auto _ : state) {
        Tape t;
        Value out = t.matmul(t.constant(a), t.constant(b));
        benchmark::DoNotOptimize(out.tensor().ptr());
    }
    state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(96)->Arg(256)->Arg(512);

void BM_RfftRows(benchmark::State& state) {
    const auto len = state.range(0);
    const std::int64_t rows = 256;
    Rng rng(1);
    Tensor x = Tensor::uniform({rows, len}, rng, -1.0, 1.0);
    std::vector<double> re(static_cast<std::size_t>(rows * rfft_bins(len)));
    std::vector<double> im(re.size());
    for (auto _ : state) {
        rfft_rows(x.ptr(), rows, len, re.data(), im.data());
        benchmark::DoNotOptimize(re.data());
    }
    state.SetItemsProcessed(state.iterations() * rows);
}
BENCHMARK(BM_RfftRows)->Arg(96)->Arg(97)->Arg(192)->Arg(720);

void BM_ForwardBatch(benchmark::State& state) {
    const auto batch = state.range(0);
    ModelConfig cfg;
    cfg.channels = 7;
    Rng rng(1);
    ModelParams params = init_params(cfg, rng);
    Tensor x = Tensor::uniform({batch, cfg.lookback, cfg.channels}, rng, -1.0, 1.0);
    for (auto _ : state) {
        Tape t;
        Rng r(2);
        ForwardGraph g = build_forward(t, x, params, cfg, r, false, false);
        benchmark::DoNotOptimize(g.y.tensor().ptr());
    }
    state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ForwardBatch)->Arg(1)->Arg(32);

void BM_TrainStep(benchmark::State& state) {
    ModelConfig cfg;
    cfg.channels = 7;
    TrainConfig tcfg;
    Rng rng(1);
    ModelParams params = init_params(cfg, rng);
    Tensor x = Tensor::uniform({32, cfg.lookback, cfg.channels}, rng, -1.0, 1.0);
    Tensor y = Tensor::uniform({32, cfg.horizon, cfg.channels}, rng, -1.0, 1.0);
    AdamW opt;
    for (auto _ : state) {
        Tape t;
        Rng r(2);
        ForwardGraph g = build_forward(t, x, params, cfg, r, true, true);
        Value loss = loss_value(t, g.y, t.constant(y), LossKind::Mse);
        Gradients grads = t.backward(loss);
        std::vector<Tensor> gs;
        for (auto& [name, v] : g.params) gs.push_back(grads.at(v).clone());
        opt.step(params.entries(), gs, 1e-3, 1e-4);
        benchmark::DoNotOptimize(loss.tensor().item());
    }
}
BENCHMARK(BM_TrainStep);

} // namespace

BENCHMARK_MAIN();
