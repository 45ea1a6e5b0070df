#pragma once

#include <array>
#include <string>
#include <vector>

#include "mdmlp/tensor.hpp"

namespace mdmlp {

// Per-window, per-channel statistics captured for output inversion.
struct RevinStats {
    Tensor mean; // [C]
    Tensor std;  // [C], clamped to >= eps
    double eps = 1e-5;
};

// out[:,c] = (x[:,c] - mean_c) / max(std_c, eps)
std::pair<Tensor, RevinStats> revin_normalize(const Tensor& x /* [L x C] */, double eps);

// out[:,c] = y[:,c] * std_c + mean_c
Tensor revin_denormalize(const Tensor& y /* [Q x C] */, const RevinStats& stats);

// Batched forms over [B x L x C]; stats are [B x C].
struct BatchRevinStats {
    Tensor mean, std; // [B x C]
    double eps = 1e-5;
};
std::pair<Tensor, BatchRevinStats> revin_normalize_batch(const Tensor& x, double eps);

// trend[0] = x[0]; trend[t] = a*x[t] + (1-a)*trend[t-1]; seasonal = x - trend.
std::pair<Tensor, Tensor> ema_decompose(const Tensor& x /* [L x C] */, double a);
std::pair<Tensor, Tensor> ema_decompose_batch(const Tensor& x /* [B x L x C] */, double a);

// Chronological split; val and test are prefixed with the last `lookback`
// rows of the preceding segment so every target is predictable.
struct SplitSeries {
    Tensor train, val, test; // each [T_i x C], possibly empty
};
SplitSeries split_dataset(const Tensor& series /* [T x C] */,
                          std::array<double, 3> ratios, std::int64_t lookback,
                          std::int64_t horizon);

// Sliding lookback/horizon pairs over one contiguous segment. Windows are
// indexed lazily; input(i)/target(i) materialize copies.
class WindowedDataset {
  public:
    WindowedDataset() = default;
    WindowedDataset(Tensor series, std::int64_t lookback, std::int64_t horizon,
                    std::int64_t stride, std::string split,
                    std::vector<std::string> channel_names);

    std::int64_t size() const { return static_cast<std::int64_t>(starts_.size()); }
    Tensor input(std::int64_t i) const;  // [L x C]
    Tensor target(std::int64_t i) const; // [Q x C]
    // Stacked copies for a batch of window indices: [B x L x C], [B x Q x C].
    std::pair<Tensor, Tensor> gather(const std::vector<std::int64_t>& idx) const;

    std::int64_t lookback() const { return lookback_; }
    std::int64_t horizon() const { return horizon_; }
    std::int64_t channels() const { return series_.empty() ? 0 : series_.dim(1); }
    const std::string& split() const { return split_; }
    const std::vector<std::string>& channel_names() const { return names_; }
    const Tensor& series() const { return series_; }
    std::int64_t start(std::int64_t i) const { return starts_[static_cast<std::size_t>(i)]; }

  private:
    Tensor series_;
    std::vector<std::int64_t> starts_;
    std::int64_t lookback_ = 0, horizon_ = 0;
    std::string split_;
    std::vector<std::string> names_;
};

WindowedDataset make_windows(const Tensor& series, std::int64_t lookback, std::int64_t horizon,
                             std::int64_t stride = 1, std::string split = "train",
                             std::vector<std::string> channel_names = {});

// Dataset-level z-scoring: all three segments scaled by train statistics.
struct StandardizeStats {
    Tensor mean, std; // per channel, train-derived
};
StandardizeStats standardize_global(SplitSeries& splits, double eps = 1e-5);

} // namespace mdmlp
