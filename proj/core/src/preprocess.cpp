#include "mdmlp/preprocess.hpp"

#include <cmath>
#include <iostream>

#include "mdmlp/errors.hpp"

namespace mdmlp {

namespace {

void check_lc(const Tensor& x, const char* who) {
    if (x.rank() != 2) throw DimensionError(std::string(who) + " expects [L x C], got " + shape_str(x.shape()));
}

} // namespace

std::pair<Tensor, RevinStats> revin_normalize(const Tensor& x, double eps) {
    check_lc(x, "revin_normalize");
    const auto rows = x.dim(0), cols = x.dim(1);
    if (rows < 2) throw DimensionError("revin_normalize needs at least 2 rows");
    if (eps <= 0.0) throw ConfigError("revin eps must be positive");
    Tensor mean = Tensor::zeros({cols});
    Tensor stdev = Tensor::zeros({cols});
    auto mu = mean.mut();
    auto sd = stdev.mut();
    auto d = x.data();
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c) mu[c] += d[r * cols + c];
    for (std::int64_t c = 0; c < cols; ++c) mu[c] /= static_cast<double>(rows);
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c) {
            const double v = d[r * cols + c] - mu[c];
            sd[c] += v * v;
        }
    for (std::int64_t c = 0; c < cols; ++c)
        sd[c] = std::max(std::sqrt(sd[c] / static_cast<double>(rows)), eps);
    Tensor out = Tensor::zeros(x.shape());
    auto o = out.mut();
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c) o[r * cols + c] = (d[r * cols + c] - mu[c]) / sd[c];
    return {std::move(out), RevinStats{std::move(mean), std::move(stdev), eps}};
}

Tensor revin_denormalize(const Tensor& y, const RevinStats& stats) {
    check_lc(y, "revin_denormalize");
    const auto rows = y.dim(0), cols = y.dim(1);
    if (stats.mean.size() != cols)
        throw DimensionError("revin stats are for " + std::to_string(stats.mean.size()) + " channels");
    Tensor out = Tensor::zeros(y.shape());
    auto o = out.mut();
    auto d = y.data();
    auto mu = stats.mean.data();
    auto sd = stats.std.data();
    // Two passes so the product is rounded before the shift; a fused
    // multiply-add here would diverge from the graph path by one ulp.
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c) o[r * cols + c] = d[r * cols + c] * sd[c];
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c) o[r * cols + c] += mu[c];
    return out;
}

std::pair<Tensor, BatchRevinStats> revin_normalize_batch(const Tensor& x, double eps) {
    if (x.rank() != 3) throw DimensionError("revin_normalize_batch expects [B x L x C]");
    const auto b = x.dim(0), rows = x.dim(1), cols = x.dim(2);
    if (rows < 2) throw DimensionError("revin_normalize needs at least 2 rows");
    Tensor mean = Tensor::zeros({b, cols});
    Tensor stdev = Tensor::zeros({b, cols});
    Tensor out = Tensor::zeros(x.shape());
    auto mu = mean.mut();
    auto sd = stdev.mut();
    auto o = out.mut();
    auto d = x.data();
    for (std::int64_t i = 0; i < b; ++i) {
        const double* xb = d.data() + i * rows * cols;
        double* mb = mu.data() + i * cols;
        double* sb = sd.data() + i * cols;
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t c = 0; c < cols; ++c) mb[c] += xb[r * cols + c];
        for (std::int64_t c = 0; c < cols; ++c) mb[c] /= static_cast<double>(rows);
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t c = 0; c < cols; ++c) {
                const double v = xb[r * cols + c] - mb[c];
                sb[c] += v * v;
            }
        for (std::int64_t c = 0; c < cols; ++c)
            sb[c] = std::max(std::sqrt(sb[c] / static_cast<double>(rows)), eps);
        double* ob = o.data() + i * rows * cols;
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t c = 0; c < cols; ++c)
                ob[r * cols + c] = (xb[r * cols + c] - mb[c]) / sb[c];
    }
    return {std::move(out), BatchRevinStats{std::move(mean), std::move(stdev), eps}};
}

std::pair<Tensor, Tensor> ema_decompose(const Tensor& x, double a) {
    check_lc(x, "ema_decompose");
    if (!(a > 0.0 && a <= 1.0)) throw ConfigError("EMA smoothing factor must be in (0, 1]");
    const auto rows = x.dim(0), cols = x.dim(1);
    Tensor trend = Tensor::zeros(x.shape());
    Tensor seasonal = Tensor::zeros(x.shape());
    auto tr = trend.mut();
    auto se = seasonal.mut();
    auto d = x.data();
    for (std::int64_t c = 0; c < cols; ++c) tr[c] = d[c];
    for (std::int64_t r = 1; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c)
            tr[r * cols + c] = a * d[r * cols + c] + (1.0 - a) * tr[(r - 1) * cols + c];
    for (std::int64_t i = 0; i < rows * cols; ++i) se[i] = d[i] - tr[i];
    return {std::move(trend), std::move(seasonal)};
}

std::pair<Tensor, Tensor> ema_decompose_batch(const Tensor& x, double a) {
    if (x.rank() != 3) throw DimensionError("ema_decompose_batch expects [B x L x C]");
    if (!(a > 0.0 && a <= 1.0)) throw ConfigError("EMA smoothing factor must be in (0, 1]");
    const auto b = x.dim(0), rows = x.dim(1), cols = x.dim(2);
    Tensor trend = Tensor::zeros(x.shape());
    Tensor seasonal = Tensor::zeros(x.shape());
    auto tr = trend.mut();
    auto se = seasonal.mut();
    auto d = x.data();
    for (std::int64_t i = 0; i < b; ++i) {
        const double* xb = d.data() + i * rows * cols;
        double* tb = tr.data() + i * rows * cols;
        for (std::int64_t c = 0; c < cols; ++c) tb[c] = xb[c];
        for (std::int64_t r = 1; r < rows; ++r)
            for (std::int64_t c = 0; c < cols; ++c)
                tb[r * cols + c] = a * xb[r * cols + c] + (1.0 - a) * tb[(r - 1) * cols + c];
    }
    for (std::int64_t i = 0; i < b * rows * cols; ++i) se[i] = d[i] - tr[i];
    return {std::move(trend), std::move(seasonal)};
}

namespace {

Tensor slice_rows(const Tensor& series, std::int64_t begin, std::int64_t end) {
    const auto cols = series.dim(1);
    Tensor out = Tensor::zeros({end - begin, cols});
    auto o = out.mut();
    auto d = series.data();
    for (std::int64_t r = begin; r < end; ++r)
        for (std::int64_t c = 0; c < cols; ++c) o[(r - begin) * cols + c] = d[r * cols + c];
    return out;
}

} // namespace

SplitSeries split_dataset(const Tensor& series, std::array<double, 3> ratios,
                          std::int64_t lookback, std::int64_t horizon) {
    check_lc(series, "split_dataset");
    const double total = ratios[0] + ratios[1] + ratios[2];
    if (std::fabs(total - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
    for (double r : ratios)
        if (r < 0.0) throw ConfigError("split ratios must be non-negative");
    const auto t = series.dim(0);
    // Nudge before flooring so binary representation error in the ratios
    // cannot shift a boundary by one row.
    const auto b1 =
        static_cast<std::int64_t>(std::floor(ratios[0] * static_cast<double>(t) + 1e-9));
    const auto b2 = static_cast<std::int64_t>(
        std::floor((ratios[0] + ratios[1]) * static_cast<double>(t) + 1e-9));

    SplitSeries out;
    if (ratios[0] > 0.0) {
        if (b1 < lookback + horizon)
            throw DataError("train segment too short: " + std::to_string(b1) + " rows for L+Q=" +
                            std::to_string(lookback + horizon));
        out.train = slice_rows(series, 0, b1);
    }
    if (ratios[1] > 0.0) {
        if (b2 - b1 < horizon) throw DataError("val segment too short for one target");
        out.val = slice_rows(series, b1 - lookback, b2);
    }
    if (ratios[2] > 0.0) {
        if (t - b2 < horizon) throw DataError("test segment too short for one target");
        out.test = slice_rows(series, b2 - lookback, t);
    }
    return out;
}

WindowedDataset::WindowedDataset(Tensor series, std::int64_t lookback, std::int64_t horizon,
                                 std::int64_t stride, std::string split,
                                 std::vector<std::string> channel_names)
    : series_(std::move(series)), lookback_(lookback), horizon_(horizon),
      split_(std::move(split)), names_(std::move(channel_names)) {
    if (stride < 1) throw ConfigError("window stride must be >= 1");
    const auto t = series_.dim(0);
    if (t < lookback_ + horizon_)
        throw DataError("series of " + std::to_string(t) + " rows cannot fit one window of L+Q=" +
                        std::to_string(lookback_ + horizon_));
    for (std::int64_t s = 0; s + lookback_ + horizon_ <= t; s += stride) starts_.push_back(s);
}

Tensor WindowedDataset::input(std::int64_t i) const {
    const auto s = starts_[static_cast<std::size_t>(i)];
    return slice_rows(series_, s, s + lookback_);
}

Tensor WindowedDataset::target(std::int64_t i) const {
    const auto s = starts_[static_cast<std::size_t>(i)];
    return slice_rows(series_, s + lookback_, s + lookback_ + horizon_);
}

std::pair<Tensor, Tensor> WindowedDataset::gather(const std::vector<std::int64_t>& idx) const {
    const auto b = static_cast<std::int64_t>(idx.size());
    const auto cols = channels();
    Tensor xs = Tensor::zeros({b, lookback_, cols});
    Tensor ys = Tensor::zeros({b, horizon_, cols});
    auto xo = xs.mut();
    auto yo = ys.mut();
    auto d = series_.data();
    for (std::int64_t n = 0; n < b; ++n) {
        const auto s = starts_[static_cast<std::size_t>(idx[static_cast<std::size_t>(n)])];
        const double* src = d.data() + s * cols;
        double* dx = xo.data() + n * lookback_ * cols;
        for (std::int64_t i = 0; i < lookback_ * cols; ++i) dx[i] = src[i];
        const double* st = d.data() + (s + lookback_) * cols;
        double* dy = yo.data() + n * horizon_ * cols;
        for (std::int64_t i = 0; i < horizon_ * cols; ++i) dy[i] = st[i];
    }
    return {std::move(xs), std::move(ys)};
}

WindowedDataset make_windows(const Tensor& series, std::int64_t lookback, std::int64_t horizon,
                             std::int64_t stride, std::string split,
                             std::vector<std::string> channel_names) {
    check_lc(series, "make_windows");
    return WindowedDataset(series.clone(), lookback, horizon, stride, std::move(split),
                           std::move(channel_names));
}

StandardizeStats standardize_global(SplitSeries& splits, double eps) {
    if (splits.train.empty()) throw DataError("standardize_global requires a train segment");
    const auto rows = splits.train.dim(0), cols = splits.train.dim(1);
    Tensor mean = Tensor::zeros({cols});
    Tensor stdev = Tensor::zeros({cols});
    auto mu = mean.mut();
    auto sd = stdev.mut();
    auto d = splits.train.data();
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c) mu[c] += d[r * cols + c];
    for (std::int64_t c = 0; c < cols; ++c) mu[c] /= static_cast<double>(rows);
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c) {
            const double v = d[r * cols + c] - mu[c];
            sd[c] += v * v;
        }
    for (std::int64_t c = 0; c < cols; ++c) {
        sd[c] = std::sqrt(sd[c] / static_cast<double>(rows));
        if (sd[c] < eps) {
            std::cerr << "warning: train channel " << c << " has near-zero variance, clamping to "
                      << eps << "\n";
            sd[c] = eps;
        }
    }
    auto apply = [&](Tensor& seg) {
        if (seg.empty()) return;
        auto o = seg.mut();
        const auto n = seg.dim(0);
        for (std::int64_t r = 0; r < n; ++r)
            for (std::int64_t c = 0; c < cols; ++c)
                o[r * cols + c] = (o[r * cols + c] - mu[c]) / sd[c];
    };
    apply(splits.train);
    apply(splits.val);
    apply(splits.test);
    return {std::move(mean), std::move(stdev)};
}

} // namespace mdmlp
