#include "mdmlp/model.hpp"

#include <cmath>

#include "mdmlp/errors.hpp"

namespace mdmlp {

std::int64_t dca_coefficient(std::int64_t channels, std::int64_t tau) {
    if (channels < 1) throw ConfigError("channel count must be >= 1");
    if (tau < 1) throw ConfigError("tau must be >= 1");
    // smallest k >= 1 with (k*tau)^2 >= C, i.e. ceil(sqrt(C)/tau) without
    // floating-point edge cases at perfect squares
    std::int64_t k = 1;
    while (k * k * tau * tau < channels) ++k;
    return k;
}

void ModelConfig::validate() const {
    if (lookback < 1 || horizon < 1 || channels < 1)
        throw ConfigError("lookback, horizon and channels must be >= 1");
    if (tau < 1) throw ConfigError("tau must be >= 1");
    if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
    if (base_neurons < 1) throw ConfigError("base_neurons must be >= 1");
    if (fixed_neurons < 1) throw ConfigError("fixed_neurons must be >= 1");
    for (double p : {dropout_trend, dropout_strong, dropout_weak, dropout_eia})
        if (p < 0.0 || p >= 1.0) throw ConfigError("dropout probabilities must be in [0, 1)");
    if (!(ema_a > 0.0 && ema_a <= 1.0)) throw ConfigError("ema_a must be in (0, 1]");
    if (shrink_lambda < 0.0) throw ConfigError("shrink_lambda must be >= 0");
    if (revin_eps <= 0.0) throw ConfigError("revin_eps must be positive");
}

std::int64_t ModelConfig::cof() const {
    return capacity == CapacityMode::Dca ? dca_coefficient(channels, tau) : 1;
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::entries() {
    std::vector<std::pair<std::string, Tensor*>> out;
    auto add = [&](const char* name, Tensor& t) {
        if (!t.empty()) out.emplace_back(name, &t);
    };
    add("trend.l1.w", trend1.w);
    add("trend.l1.b", trend1.b);
    add("trend.l2.w", trend2.w);
    add("trend.l2.b", trend2.b);
    add("trend.l3.w", trend3.w);
    add("trend.l3.b", trend3.b);
    add("strong.embed", embed_w);
    add("strong.fre.w_re", fre.w_re);
    add("strong.fre.w_im", fre.w_im);
    add("strong.fre.b_re", fre.b_re);
    add("strong.fre.b_im", fre.b_im);
    add("strong.l1.w", strong1.w);
    add("strong.l1.b", strong1.b);
    add("strong.l2.w", strong2.w);
    add("strong.l2.b", strong2.b);
    add("weak.l1.w", weak1.w);
    add("weak.l1.b", weak1.b);
    add("weak.l2.w", weak2.w);
    add("weak.l2.b", weak2.b);
    add("azcf.alpha", azcf_alpha);
    add("dwl.alpha1", dwl_alpha1);
    add("dwl.alpha2", dwl_alpha2);
    add("ctf.alpha", ctf_alpha);
    add("seasonal_mlp.w", seasonal_mlp.w);
    add("seasonal_mlp.b", seasonal_mlp.b);
    add("cwa.w", cwa_gate.w);
    add("cwa.b", cwa_gate.b);
    add("eia.l1.w", eia1.w);
    add("eia.l1.b", eia1.b);
    add("eia.l2.w", eia2.w);
    add("eia.l2.b", eia2.b);
    add("fusion_mlp.w", fusion_mlp.w);
    add("fusion_mlp.b", fusion_mlp.b);
    add("revin.gamma", revin_gamma);
    add("revin.delta", revin_delta);
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::entries() const {
    auto mut = const_cast<ModelParams*>(this)->entries();
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.reserve(mut.size());
    for (auto& [n, t] : mut) out.emplace_back(n, t);
    return out;
}

std::int64_t ModelParams::parameter_count() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : entries()) n += t->size();
    return n;
}

ModelParams ModelParams::clone() const {
    ModelParams out = *this;
    for (auto& [name, t] : out.entries()) *t = t->clone();
    return out;
}

namespace {

LinearParams init_linear(std::int64_t in, std::int64_t out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    return {Tensor::uniform({in, out}, rng, -bound, bound), Tensor::zeros({out})};
}

} // namespace

ModelParams init_params(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    const auto l = cfg.lookback, q = cfg.horizon, c = cfg.channels, e = cfg.embed_dim;
    const auto n1 = cfg.n1(), n2 = cfg.n2(), n3 = cfg.n3();

    // One substream per parameter group, so shared branches initialize
    // identically across fusion-mode variants under a common seed.
    Rng trend_rng(rng.next_u64());
    Rng strong_rng(rng.next_u64());
    Rng weak_rng(rng.next_u64());
    Rng seasonal_rng(rng.next_u64());
    Rng fusion_rng(rng.next_u64());

    ModelParams p;
    p.trend1 = init_linear(l, 4 * n1, trend_rng);
    p.trend2 = init_linear(4 * n1, 2 * n1, trend_rng);
    p.trend3 = init_linear(2 * n1, q, trend_rng);

    p.embed_w = Tensor::uniform({e}, strong_rng, -1.0, 1.0);
    const double fre_bound = 1.0 / std::sqrt(static_cast<double>(e));
    p.fre.w_re = Tensor::uniform({e, e}, strong_rng, -fre_bound, fre_bound);
    p.fre.w_im = Tensor::uniform({e, e}, strong_rng, -fre_bound, fre_bound);
    p.fre.b_re = Tensor::zeros({e});
    p.fre.b_im = Tensor::zeros({e});
    p.strong1 = init_linear(l * e, n2, strong_rng);
    p.strong2 = init_linear(n2, q, strong_rng);

    p.weak1 = init_linear(l, n3, weak_rng);
    p.weak2 = init_linear(n3, q, weak_rng);

    switch (cfg.seasonal_fusion) {
        case SeasonalFusionMode::Azcf:
            p.azcf_alpha = Tensor::zeros({1, c});
            break;
        case SeasonalFusionMode::Rcf:
            p.azcf_alpha = Tensor::uniform({1, c}, seasonal_rng, -0.1, 0.1);
            break;
        case SeasonalFusionMode::DwlF:
            p.dwl_alpha1 = Tensor::full({1, c}, 1.0);
            p.dwl_alpha2 = Tensor::zeros({1, c});
            break;
        case SeasonalFusionMode::Ctf:
            p.ctf_alpha = Tensor::zeros({q, c});
            break;
        case SeasonalFusionMode::MlpF:
            p.seasonal_mlp = init_linear(2 * c, c, seasonal_rng);
            break;
        case SeasonalFusionMode::CwaF:
            p.cwa_gate = init_linear(2 * c, c, seasonal_rng);
            break;
        case SeasonalFusionMode::WoWs:
            break;
    }

    switch (cfg.fusion) {
        case FusionMode::Eia:
        case FusionMode::Agm:
            p.eia1 = init_linear(2 * c, 4 * c, fusion_rng);
            // Zero final layer makes the initial gate exactly 0.5 everywhere.
            p.eia2 = {Tensor::zeros({4 * c, c}), Tensor::zeros({c})};
            break;
        case FusionMode::Mlp:
            p.fusion_mlp = init_linear(2 * c, c, fusion_rng);
            break;
        case FusionMode::Add:
            break;
    }

    if (cfg.revin_affine) {
        p.revin_gamma = Tensor::full({c}, 1.0);
        p.revin_delta = Tensor::zeros({c});
    }
    return p;
}

namespace {

struct Leafs {
    Value t1w, t1b, t2w, t2b, t3w, t3b;
    Value embed, fwre, fwim, fbre, fbim;
    Value s1w, s1b, s2w, s2b;
    Value w1w, w1b, w2w, w2b;
    Value azcf, dwl1, dwl2, ctf, smlpw, smlpb, cwaw, cwab;
    Value e1w, e1b, e2w, e2b, fmlpw, fmlpb;
    Value gamma, delta;
    std::vector<std::pair<std::string, Value>> named;
};

Leafs leaf_params(Tape& t, const ModelParams& p, bool with_grad) {
    Leafs lf;
    auto add = [&](const char* name, const Tensor& ten, Value& slot) {
        if (ten.empty()) return;
        slot = t.leaf(ten, with_grad);
        lf.named.emplace_back(name, slot);
    };
    add("trend.l1.w", p.trend1.w, lf.t1w);
    add("trend.l1.b", p.trend1.b, lf.t1b);
    add("trend.l2.w", p.trend2.w, lf.t2w);
    add("trend.l2.b", p.trend2.b, lf.t2b);
    add("trend.l3.w", p.trend3.w, lf.t3w);
    add("trend.l3.b", p.trend3.b, lf.t3b);
    add("strong.embed", p.embed_w, lf.embed);
    add("strong.fre.w_re", p.fre.w_re, lf.fwre);
    add("strong.fre.w_im", p.fre.w_im, lf.fwim);
    add("strong.fre.b_re", p.fre.b_re, lf.fbre);
    add("strong.fre.b_im", p.fre.b_im, lf.fbim);
    add("strong.l1.w", p.strong1.w, lf.s1w);
    add("strong.l1.b", p.strong1.b, lf.s1b);
    add("strong.l2.w", p.strong2.w, lf.s2w);
    add("strong.l2.b", p.strong2.b, lf.s2b);
    add("weak.l1.w", p.weak1.w, lf.w1w);
    add("weak.l1.b", p.weak1.b, lf.w1b);
    add("weak.l2.w", p.weak2.w, lf.w2w);
    add("weak.l2.b", p.weak2.b, lf.w2b);
    add("azcf.alpha", p.azcf_alpha, lf.azcf);
    add("dwl.alpha1", p.dwl_alpha1, lf.dwl1);
    add("dwl.alpha2", p.dwl_alpha2, lf.dwl2);
    add("ctf.alpha", p.ctf_alpha, lf.ctf);
    add("seasonal_mlp.w", p.seasonal_mlp.w, lf.smlpw);
    add("seasonal_mlp.b", p.seasonal_mlp.b, lf.smlpb);
    add("cwa.w", p.cwa_gate.w, lf.cwaw);
    add("cwa.b", p.cwa_gate.b, lf.cwab);
    add("eia.l1.w", p.eia1.w, lf.e1w);
    add("eia.l1.b", p.eia1.b, lf.e1b);
    add("eia.l2.w", p.eia2.w, lf.e2w);
    add("eia.l2.b", p.eia2.b, lf.e2b);
    add("fusion_mlp.w", p.fusion_mlp.w, lf.fmlpw);
    add("fusion_mlp.b", p.fusion_mlp.b, lf.fmlpb);
    add("revin.gamma", p.revin_gamma, lf.gamma);
    add("revin.delta", p.revin_delta, lf.delta);
    return lf;
}

// Channel-independent branches operate on rows of length L; callers stack
// batch and channel into the row dimension.

Value trend_rows(Tape& t, Value x, const Leafs& lf, const ModelConfig& cfg, Rng& rng,
                 bool training) {
    Value h = linear(t, x, lf.t1w, lf.t1b);
    h = t.activation(Activation::Tanh, h);
    h = t.dropout(h, cfg.dropout_trend, rng, training);
    h = linear(t, h, lf.t2w, lf.t2b);
    h = t.activation(Activation::Tanh, h);
    h = t.dropout(h, cfg.dropout_trend, rng, training);
    return linear(t, h, lf.t3w, lf.t3b);
}

Value strong_rows(Tape& t, Value x, const Leafs& lf, const ModelConfig& cfg, Rng& rng,
                  bool training) {
    const auto rows = x.tensor().dim(0);
    const auto l = cfg.lookback, e = cfg.embed_dim;
    Value emb = t.value_embed(x, lf.embed);                   // [R x L x E]
    Value emb_t = t.transpose_last2(emb);                     // [R x E x L]
    ComplexSpectrum sp = rfft(t, emb_t);                      // [R x E x F]
    ComplexSpectrum sp_t{t.transpose_last2(sp.re), t.transpose_last2(sp.im)};
    FreMlpValues fv{lf.fwre, lf.fwim, lf.fbre, lf.fbim};
    ComplexSpectrum fm = fre_mlp(t, sp_t, fv, cfg.leaky_slope, cfg.shrink_lambda);
    ComplexSpectrum fm_t{t.transpose_last2(fm.re), t.transpose_last2(fm.im)};
    Value feat = irfft(t, fm_t, l);                           // [R x E x L]
    Value feat_t = t.transpose_last2(feat);                   // [R x L x E]
    Value flat = t.reshape(feat_t, {rows, l * e});
    Value h = linear(t, flat, lf.s1w, lf.s1b);
    h = t.activation(Activation::LeakyRelu, h, cfg.leaky_slope);
    h = t.dropout(h, cfg.dropout_strong, rng, training);
    return linear(t, h, lf.s2w, lf.s2b);
}

Value weak_rows(Tape& t, Value x, const Leafs& lf, const ModelConfig& cfg, Rng& rng,
                bool training) {
    Value h = linear(t, x, lf.w1w, lf.w1b);
    h = t.activation(Activation::Tanh, h);
    h = t.dropout(h, cfg.dropout_weak, rng, training);
    return linear(t, h, lf.w2w, lf.w2b);
}

Value rows_to_bqc(Tape& t, Value rows, std::int64_t b, std::int64_t c, std::int64_t q) {
    return t.transpose_last2(t.reshape(rows, {b, c, q}));
}

void require_leaf(const Value& v, const char* what) {
    if (v.tape == nullptr)
        throw ContractError(std::string("parameters were not initialized for ") + what);
}

Value fuse_seasonal_graph(Tape& t, Value y21, Value y22, const ModelConfig& cfg,
                          const Leafs& lf, std::int64_t b, std::int64_t q, std::int64_t c) {
    switch (cfg.seasonal_fusion) {
        case SeasonalFusionMode::WoWs:
            return y21;
        case SeasonalFusionMode::Azcf:
        case SeasonalFusionMode::Rcf: {
            require_leaf(lf.azcf, "the per-channel seasonal gate");
            Value a = t.reshape(y21, {b * q, c});
            Value w = t.reshape(y22, {b * q, c});
            return t.reshape(t.add(a, t.mul_rowvec(w, lf.azcf)), {b, q, c});
        }
        case SeasonalFusionMode::DwlF: {
            require_leaf(lf.dwl1, "dual-coefficient seasonal fusion");
            Value a = t.reshape(y21, {b * q, c});
            Value w = t.reshape(y22, {b * q, c});
            return t.reshape(t.add(t.mul_rowvec(a, lf.dwl1), t.mul_rowvec(w, lf.dwl2)),
                             {b, q, c});
        }
        case SeasonalFusionMode::Ctf: {
            require_leaf(lf.ctf, "the time-varying seasonal gate");
            Value a = t.tile_leading(lf.ctf, b); // [B x Q x C]
            return t.add(y21, t.mul(y22, a));
        }
        case SeasonalFusionMode::MlpF: {
            require_leaf(lf.smlpw, "mlp seasonal fusion");
            Value cat = t.concat_cols(t.reshape(y21, {b * q, c}), t.reshape(y22, {b * q, c}));
            return t.reshape(linear(t, cat, lf.smlpw, lf.smlpb), {b, q, c});
        }
        case SeasonalFusionMode::CwaF: {
            require_leaf(lf.cwaw, "channel-attention seasonal fusion");
            Value cat = t.concat_cols(t.reshape(y21, {b * q, c}), t.reshape(y22, {b * q, c}));
            Value pooled = t.mean_mid3(t.reshape(cat, {b, q, 2 * c}));
            Value gate = t.activation(Activation::Sigmoid, linear(t, pooled, lf.cwaw, lf.cwab));
            Value gf = t.repeat_mid3(gate, q);
            Value ones = t.constant(Tensor::full({b, q, c}, 1.0));
            return t.add(t.mul(y21, gf), t.mul(y22, t.sub(ones, gf)));
        }
    }
    throw ConfigError("unknown seasonal fusion mode");
}

std::pair<Value, std::optional<Value>> fuse_final_graph(Tape& t, Value y1, Value y2,
                                                        const ModelConfig& cfg, const Leafs& lf,
                                                        Rng& rng, bool training, std::int64_t b,
                                                        std::int64_t q, std::int64_t c) {
    switch (cfg.fusion) {
        case FusionMode::Add:
            return {t.add(y1, y2), std::nullopt};
        case FusionMode::Mlp: {
            require_leaf(lf.fmlpw, "mlp trend/seasonal fusion");
            Value cat = t.concat_cols(t.reshape(y1, {b * q, c}), t.reshape(y2, {b * q, c}));
            return {t.reshape(linear(t, cat, lf.fmlpw, lf.fmlpb), {b, q, c}), std::nullopt};
        }
        case FusionMode::Agm:
        case FusionMode::Eia: {
            require_leaf(lf.e1w, "the gated trend/seasonal fusion");
            Value y1f = t.reshape(y1, {b * q, c});
            Value y2f = t.reshape(y2, {b * q, c});
            Value cat = t.concat_cols(y1f, y2f);
            Value h = linear(t, cat, lf.e1w, lf.e1b);
            h = t.activation(cfg.gelu_exact ? Activation::GeluExact : Activation::Gelu, h);
            h = t.dropout(h, cfg.dropout_eia, rng, training);
            Value beta = t.activation(Activation::Sigmoid, linear(t, h, lf.e2w, lf.e2b));
            Value ones = t.constant(Tensor::full({b * q, c}, 1.0));
            Value conv = t.add(t.mul(beta, y1f), t.mul(t.sub(ones, beta), y2f));
            Value y3f = cfg.fusion == FusionMode::Eia ? t.scale(conv, 2.0) : conv;
            return {t.reshape(y3f, {b, q, c}), t.reshape(beta, {b, q, c})};
        }
    }
    throw ConfigError("unknown fusion mode");
}

Tensor permute_blc_to_bcl(const Tensor& x) {
    const auto b = x.dim(0), l = x.dim(1), c = x.dim(2);
    Tensor out = Tensor::zeros({b, c, l});
    auto o = out.mut();
    auto d = x.data();
    for (std::int64_t i = 0; i < b; ++i)
        for (std::int64_t r = 0; r < l; ++r)
            for (std::int64_t k = 0; k < c; ++k)
                o[(i * c + k) * l + r] = d[(i * l + r) * c + k];
    return out;
}

Tensor expand_stats(const Tensor& s /* [B x C] */, std::int64_t b, std::int64_t q,
                    std::int64_t c) {
    Tensor out = Tensor::zeros({b, q, c});
    auto o = out.mut();
    auto d = s.data();
    for (std::int64_t i = 0; i < b; ++i)
        for (std::int64_t r = 0; r < q; ++r)
            for (std::int64_t k = 0; k < c; ++k) o[(i * q + r) * c + k] = d[i * c + k];
    return out;
}

} // namespace

ForwardGraph build_forward(Tape& t, const Tensor& batch, const ModelParams& params,
                           const ModelConfig& cfg, Rng& rng, bool training, bool with_grad) {
    cfg.validate();
    if (batch.rank() != 3 || batch.dim(1) != cfg.lookback || batch.dim(2) != cfg.channels)
        throw DimensionError("forward expects [B x " + std::to_string(cfg.lookback) + " x " +
                             std::to_string(cfg.channels) + "], got " + shape_str(batch.shape()));
    const auto b = batch.dim(0), l = cfg.lookback, q = cfg.horizon, c = cfg.channels;

    auto [xn, stats] = revin_normalize_batch(batch, cfg.revin_eps);
    auto [trend_part, seasonal_part] = ema_decompose_batch(xn, cfg.ema_a);

    Leafs lf = leaf_params(t, params, with_grad);

    ForwardGraph g;
    g.params = lf.named;
    g.stats = stats;

    if (cfg.revin_affine) {
        // EMA is linear and preserves constants, so the affine pair commutes
        // with the decomposition: scale both parts, shift only the trend.
        Value tc = t.constant(trend_part.reshaped({b * l, c}));
        Value sc = t.constant(seasonal_part.reshaped({b * l, c}));
        Value ta = t.add_rowvec(t.mul_rowvec(tc, lf.gamma), lf.delta);
        Value sa = t.mul_rowvec(sc, lf.gamma);
        g.x1 = t.reshape(t.transpose_last2(t.reshape(ta, {b, l, c})), {b * c, l});
        g.x2 = t.reshape(t.transpose_last2(t.reshape(sa, {b, l, c})), {b * c, l});
    } else {
        g.x1 = t.constant(permute_blc_to_bcl(trend_part).reshaped({b * c, l}));
        g.x2 = t.constant(permute_blc_to_bcl(seasonal_part).reshaped({b * c, l}));
    }

    g.y1 = rows_to_bqc(t, trend_rows(t, g.x1, lf, cfg, rng, training), b, c, q);
    g.y21 = rows_to_bqc(t, strong_rows(t, g.x2, lf, cfg, rng, training), b, c, q);
    if (cfg.seasonal_fusion != SeasonalFusionMode::WoWs)
        g.y22 = rows_to_bqc(t, weak_rows(t, g.x2, lf, cfg, rng, training), b, c, q);

    g.y2 = fuse_seasonal_graph(t, g.y21, g.y22, cfg, lf, b, q, c);
    auto [y3, beta] = fuse_final_graph(t, g.y1, g.y2, cfg, lf, rng, training, b, q, c);
    g.y3 = y3;
    g.beta = beta;

    Value yr = g.y3;
    if (cfg.revin_affine) {
        Value flat = t.reshape(yr, {b * q, c});
        flat = t.add_rowvec(flat, t.neg(lf.delta));
        flat = t.mul_rowvec(flat, t.recip(lf.gamma));
        yr = t.reshape(flat, {b, q, c});
    }
    g.y = t.add(t.mul(yr, t.constant(expand_stats(stats.std, b, q, c))),
                t.constant(expand_stats(stats.mean, b, q, c)));
    return g;
}

std::pair<Tensor, ForwardTrace> model_forward(const Tensor& x, const ModelParams& params,
                                              const ModelConfig& cfg, Rng& rng, bool training) {
    if (x.rank() != 2) throw DimensionError("model_forward expects [L x C]");
    Tape t;
    ForwardGraph g = build_forward(t, x.reshaped({1, x.dim(0), x.dim(1)}), params, cfg, rng,
                                   training, false);
    const auto l = cfg.lookback, q = cfg.horizon, c = cfg.channels;
    ForwardTrace tr;
    tr.x1 = g.x1.tensor().reshaped({c, l});
    tr.x2 = g.x2.tensor().reshaped({c, l});
    tr.y1 = g.y1.tensor().reshaped({q, c});
    tr.y21 = g.y21.tensor().reshaped({q, c});
    if (g.y22.tape != nullptr) tr.y22 = g.y22.tensor().reshaped({q, c});
    tr.y2 = g.y2.tensor().reshaped({q, c});
    tr.y3 = g.y3.tensor().reshaped({q, c});
    if (g.beta) tr.beta = g.beta->tensor().reshaped({q, c});
    tr.y = g.y.tensor().reshaped({q, c});
    tr.stats = RevinStats{g.stats.mean.reshaped({c}), g.stats.std.reshaped({c}), g.stats.eps};
    return {tr.y, tr};
}

namespace {

void check_cl(const Tensor& x, const ModelConfig& cfg, const char* who) {
    if (x.rank() != 2 || x.dim(0) != cfg.channels || x.dim(1) != cfg.lookback)
        throw DimensionError(std::string(who) + " expects [C x L] = [" +
                             std::to_string(cfg.channels) + " x " + std::to_string(cfg.lookback) +
                             "], got " + shape_str(x.shape()));
}

} // namespace

Tensor trend_forward(const Tensor& x1, const ModelParams& p, const ModelConfig& cfg, Rng& rng,
                     bool training) {
    check_cl(x1, cfg, "trend_forward");
    Tape t;
    Leafs lf = leaf_params(t, p, false);
    Value rows = trend_rows(t, t.constant(x1), lf, cfg, rng, training);
    return t.transpose(rows).tensor();
}

Tensor strong_seasonal_forward(const Tensor& x2, const ModelParams& p, const ModelConfig& cfg,
                               Rng& rng, bool training) {
    check_cl(x2, cfg, "strong_seasonal_forward");
    Tape t;
    Leafs lf = leaf_params(t, p, false);
    Value rows = strong_rows(t, t.constant(x2), lf, cfg, rng, training);
    return t.transpose(rows).tensor();
}

Tensor weak_seasonal_forward(const Tensor& x2, const ModelParams& p, const ModelConfig& cfg,
                             Rng& rng, bool training) {
    check_cl(x2, cfg, "weak_seasonal_forward");
    Tape t;
    Leafs lf = leaf_params(t, p, false);
    Value rows = weak_rows(t, t.constant(x2), lf, cfg, rng, training);
    return t.transpose(rows).tensor();
}

Tensor seasonal_fuse(const Tensor& y21, const Tensor& y22, SeasonalFusionMode mode,
                     const ModelParams& p, const ModelConfig& cfg, Rng& rng) {
    (void)rng;
    if (!y21.same_shape(y22) && mode != SeasonalFusionMode::WoWs)
        throw DimensionError("seasonal_fuse shapes " + shape_str(y21.shape()) + " vs " +
                             shape_str(y22.shape()));
    ModelConfig local = cfg;
    local.seasonal_fusion = mode;
    const auto q = y21.dim(0), c = y21.dim(1);
    Tape t;
    Leafs lf = leaf_params(t, p, false);
    Value a = t.constant(y21.reshaped({1, q, c}));
    Value w = y22.empty() ? Value{} : t.constant(y22.reshaped({1, q, c}));
    return fuse_seasonal_graph(t, a, w, local, lf, 1, q, c).tensor().reshaped({q, c});
}

std::pair<Tensor, Tensor> eia_fuse(const Tensor& y1, const Tensor& y2, FusionMode mode,
                                   const ModelParams& p, const ModelConfig& cfg, Rng& rng,
                                   bool training) {
    if (!y1.same_shape(y2))
        throw DimensionError("eia_fuse shapes " + shape_str(y1.shape()) + " vs " +
                             shape_str(y2.shape()));
    ModelConfig local = cfg;
    local.fusion = mode;
    const auto q = y1.dim(0), c = y1.dim(1);
    Tape t;
    Leafs lf = leaf_params(t, p, false);
    Value a = t.constant(y1.reshaped({1, q, c}));
    Value b = t.constant(y2.reshaped({1, q, c}));
    auto [y3, beta] = fuse_final_graph(t, a, b, local, lf, rng, training, 1, q, c);
    Tensor beta_t;
    if (beta) beta_t = beta->tensor().reshaped({q, c});
    return {y3.tensor().reshaped({q, c}), beta_t};
}

std::string fusion_name(FusionMode m) {
    switch (m) {
        case FusionMode::Add: return "add";
        case FusionMode::Mlp: return "mlp";
        case FusionMode::Agm: return "agm";
        case FusionMode::Eia: return "eia";
    }
    return "?";
}

std::string seasonal_fusion_name(SeasonalFusionMode m) {
    switch (m) {
        case SeasonalFusionMode::Azcf: return "azcf";
        case SeasonalFusionMode::WoWs: return "wo_ws";
        case SeasonalFusionMode::MlpF: return "mlp_f";
        case SeasonalFusionMode::DwlF: return "dwl_f";
        case SeasonalFusionMode::CwaF: return "cwa_f";
        case SeasonalFusionMode::Rcf: return "rcf";
        case SeasonalFusionMode::Ctf: return "ctf";
    }
    return "?";
}

FusionMode fusion_from_string(const std::string& s) {
    if (s == "add") return FusionMode::Add;
    if (s == "mlp") return FusionMode::Mlp;
    if (s == "agm") return FusionMode::Agm;
    if (s == "eia") return FusionMode::Eia;
    throw ConfigError("unknown fusion mode '" + s + "' (expected add|mlp|agm|eia)");
}

SeasonalFusionMode seasonal_fusion_from_string(const std::string& s) {
    if (s == "azcf") return SeasonalFusionMode::Azcf;
    if (s == "wo_ws") return SeasonalFusionMode::WoWs;
    if (s == "mlp_f") return SeasonalFusionMode::MlpF;
    if (s == "dwl_f") return SeasonalFusionMode::DwlF;
    if (s == "cwa_f") return SeasonalFusionMode::CwaF;
    if (s == "rcf") return SeasonalFusionMode::Rcf;
    if (s == "ctf") return SeasonalFusionMode::Ctf;
    throw ConfigError("unknown seasonal fusion mode '" + s +
                      "' (expected azcf|wo_ws|mlp_f|dwl_f|cwa_f|rcf|ctf)");
}

} // namespace mdmlp
