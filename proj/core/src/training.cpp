#include "mdmlp/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include "mdmlp/errors.hpp"

namespace mdmlp {

std::string loss_name(LossKind k) {
    switch (k) {
        case LossKind::Mse: return "mse";
        case LossKind::Mae: return "mae";
        case LossKind::Arctan: return "arctan";
    }
    return "?";
}

LossKind loss_from_string(const std::string& s) {
    if (s == "mse") return LossKind::Mse;
    if (s == "mae") return LossKind::Mae;
    if (s == "arctan") return LossKind::Arctan;
    throw ConfigError("unknown loss '" + s + "' (expected mse|mae|arctan)");
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    // zero freezes the parameters, which the early-stop contract relies on
    if (base_lr < 0.0) throw ConfigError("base_lr must be >= 0");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
}

double lr_at(int epoch, const TrainConfig& cfg) {
    if (epoch < 0) throw ContractError("epoch must be >= 0");
    const double e = static_cast<double>(epoch);
    return cfg.base_lr / (1.0 + std::exp(cfg.lr_k * (e - cfg.resolved_lr_w())));
}

Value loss_value(Tape& t, Value pred, Value target, LossKind kind) {
    if (pred.shape() != target.shape())
        throw DimensionError("loss shapes " + shape_str(pred.shape()) + " vs " +
                             shape_str(target.shape()));
    Value diff = t.sub(pred, target);
    switch (kind) {
        case LossKind::Mse: return t.mean(t.mul(diff, diff));
        case LossKind::Mae: return t.mean(t.abs(diff));
        case LossKind::Arctan: return t.mean(t.atan(t.abs(diff)));
    }
    throw ConfigError("unknown loss kind");
}

double loss_eval(const Tensor& pred, const Tensor& target, LossKind kind) {
    if (!pred.same_shape(target))
        throw DimensionError("loss shapes " + shape_str(pred.shape()) + " vs " +
                             shape_str(target.shape()));
    auto p = pred.data();
    auto g = target.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - g[i];
        switch (kind) {
            case LossKind::Mse: acc += d * d; break;
            case LossKind::Mae: acc += std::fabs(d); break;
            case LossKind::Arctan: acc += std::atan(std::fabs(d)); break;
        }
    }
    return acc / static_cast<double>(p.size());
}

void AdamW::step(std::vector<std::pair<std::string, Tensor*>> params,
                 const std::vector<Tensor>& grads, double lr, double weight_decay) {
    if (params.size() != grads.size())
        throw ContractError("optimizer got " + std::to_string(grads.size()) + " gradients for " +
                            std::to_string(params.size()) + " parameters");
    if (m_.empty()) {
        for (auto& [name, p] : params) {
            m_.push_back(Tensor::zeros(p->shape()));
            v_.push_back(Tensor::zeros(p->shape()));
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& [name, p] = params[i];
        const auto g = grads[i].data();
        if (!grads[i].all_finite())
            throw TrainingError("non-finite gradient for '" + name + "' at optimizer step " +
                                std::to_string(t_));
        auto w = p->mut();
        auto m = m_[i].mut();
        auto v = v_[i].mut();
        for (std::size_t j = 0; j < w.size(); ++j) {
            w[j] -= lr * weight_decay * w[j];
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            w[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void clip_global_norm(std::vector<Tensor>& grads, double clip) {
    if (clip <= 0.0) return;
    double sq = 0.0;
    for (const auto& g : grads)
        for (double v : g.data()) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm <= clip) return;
    const double s = clip / norm;
    for (auto& g : grads)
        for (auto& v : g.mut()) v *= s;
}

namespace {

struct Accumulator {
    std::vector<double> sse_per_step, sae_per_step;
    double sse = 0.0, sae = 0.0;
    std::int64_t points = 0, windows = 0;

    void add_batch(const Tensor& pred /* [B x Q x C] */, const Tensor& target) {
        const auto b = pred.dim(0), q = pred.dim(1), c = pred.dim(2);
        if (sse_per_step.empty()) {
            sse_per_step.assign(static_cast<std::size_t>(q), 0.0);
            sae_per_step.assign(static_cast<std::size_t>(q), 0.0);
        }
        auto p = pred.data();
        auto t = target.data();
        for (std::int64_t i = 0; i < b; ++i)
            for (std::int64_t r = 0; r < q; ++r) {
                double step_sq = 0.0, step_ab = 0.0;
                for (std::int64_t k = 0; k < c; ++k) {
                    const double d = p[(i * q + r) * c + k] - t[(i * q + r) * c + k];
                    step_sq += d * d;
                    step_ab += std::fabs(d);
                }
                sse_per_step[static_cast<std::size_t>(r)] += step_sq;
                sae_per_step[static_cast<std::size_t>(r)] += step_ab;
                sse += step_sq;
                sae += step_ab;
            }
        points += b * q * c;
        windows += b;
    }

    ForecastReport report(std::int64_t channels) const {
        ForecastReport r;
        r.windows = windows;
        if (points == 0) return r;
        r.mse = sse / static_cast<double>(points);
        r.mae = sae / static_cast<double>(points);
        const double denom = static_cast<double>(windows * channels);
        for (double v : sse_per_step) r.mse_per_step.push_back(v / denom);
        for (double v : sae_per_step) r.mae_per_step.push_back(v / denom);
        return r;
    }
};

} // namespace

ForecastReport evaluate(const ModelParams& params, const WindowedDataset& split,
                        const ModelConfig& cfg, std::int64_t eval_batch) {
    if (split.size() == 0) throw DataError("evaluate called on an empty split");
    Accumulator acc;
    Rng rng(0); // dropout-free path draws nothing
    std::vector<std::int64_t> idx;
    for (std::int64_t s = 0; s < split.size(); s += eval_batch) {
        idx.clear();
        for (std::int64_t i = s; i < std::min(split.size(), s + eval_batch); ++i) idx.push_back(i);
        auto [xs, ys] = split.gather(idx);
        Tape t;
        ForwardGraph g = build_forward(t, xs, params, cfg, rng, false, false);
        acc.add_batch(g.y.tensor(), ys);
    }
    return acc.report(cfg.channels);
}

TrainResult train_model(const WindowedDataset& train_split, const WindowedDataset& val_split,
                        const ModelConfig& mcfg, const TrainConfig& tcfg) {
    mcfg.validate();
    tcfg.validate();
    if (train_split.size() == 0 || val_split.size() == 0)
        throw DataError("training requires non-empty train and val splits");

    Rng rng(tcfg.seed);
    ModelParams params = init_params(mcfg, rng);
    AdamW opt;
    const double clip = tcfg.resolved_clip();

    TrainResult result;
    double best = std::numeric_limits<double>::infinity();
    int stale = 0;

    std::vector<std::int64_t> order(static_cast<std::size_t>(train_split.size()));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        const double lr = lr_at(epoch, tcfg);
        // Fisher-Yates with the run rng keeps the whole trajectory seeded.
        for (std::int64_t i = static_cast<std::int64_t>(order.size()) - 1; i > 0; --i) {
            const auto j = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(i + 1)));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }

        double loss_sum = 0.0;
        std::int64_t seen = 0;
        std::vector<std::int64_t> batch_idx;
        for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(tcfg.batch_size)) {
            batch_idx.clear();
            for (std::size_t i = s; i < std::min(order.size(), s + static_cast<std::size_t>(tcfg.batch_size)); ++i)
                batch_idx.push_back(order[i]);
            auto [xs, ys] = train_split.gather(batch_idx);

            Tape tape;
            ForwardGraph g = build_forward(tape, xs, params, mcfg, rng, true, true);
            Value target = tape.constant(ys);
            Value loss = loss_value(tape, g.y, target, tcfg.loss);
            const double loss_v = loss.tensor().item();
            if (!std::isfinite(loss_v))
                throw TrainingError("training diverged at epoch " + std::to_string(epoch) +
                                    ", step " + std::to_string(opt.steps_taken() + 1));
            loss_sum += loss_v * static_cast<double>(batch_idx.size());
            seen += static_cast<std::int64_t>(batch_idx.size());

            Gradients grads = tape.backward(loss);
            std::vector<Tensor> gs;
            gs.reserve(g.params.size());
            for (auto& [name, v] : g.params) gs.push_back(grads.at(v).clone());
            clip_global_norm(gs, clip);
            opt.step(params.entries(), gs, lr, tcfg.weight_decay);
        }

        ForecastReport val = evaluate(params, val_split, mcfg);
        EpochRecord rec{epoch, loss_sum / static_cast<double>(seen), val.mse, val.mae, lr};
        result.history.push_back(rec);

        if (val.mse < best) {
            best = val.mse;
            result.params = params.clone();
            result.best_epoch = epoch;
            result.best_val_mse = best;
            stale = 0;
        } else if (++stale >= tcfg.patience) {
            break;
        }
    }
    return result;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
    std::string out = "epoch,train_loss,val_mse,val_mae,lr\n";
    char buf[160];
    for (const auto& r : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss,
                      r.val_mse, r.val_mae, r.lr);
        out += buf;
    }
    return out;
}

void emit_run_dir(const std::string& dir, const std::string& config_echo,
                  const TrainResult& result) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream os(dir + "/config.txt", std::ios::trunc);
        if (!os) throw DataError("cannot write " + dir + "/config.txt");
        os << config_echo;
    }
    {
        std::ofstream os(dir + "/history.csv", std::ios::trunc);
        if (!os) throw DataError("cannot write " + dir + "/history.csv");
        os << history_csv(result.history);
    }
    save_checkpoint(dir + "/best.ckpt", config_echo, result.params);
}

} // namespace mdmlp
