#pragma once

#include <array>
#include <string>
#include <vector>

#include "mdmlp/training.hpp"

namespace mdmlp {

// One training per (variant, horizon, repetition); repetitions share seeds
// across variants so comparisons are paired.
struct AblationSpec {
    std::string axis; // "seasonal" | "eia" | "capacity"
    std::vector<std::string> variants;
    std::vector<std::int64_t> horizons;
    int repetitions = 3;
    std::uint64_t seed_base = 1;
    ModelConfig model;
    TrainConfig train;
    std::array<double, 3> ratios{0.7, 0.2, 0.1};
    std::int64_t stride = 1;
};

struct AblationCell {
    std::string variant;
    std::int64_t horizon = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    double mse = 0.0, mae = 0.0;
    std::string error;
};

struct AblationSummaryRow {
    std::string variant;
    double avg_mse = 0.0, avg_mae = 0.0;
    std::int64_t cells = 0;
};

struct AblationTable {
    std::string axis;
    std::vector<AblationCell> cells;
    std::vector<AblationSummaryRow> summary;
};

ModelConfig apply_variant(const ModelConfig& base, const std::string& axis,
                          const std::string& variant);

AblationTable run_ablation(const AblationSpec& spec, const Tensor& series);

std::string ablation_csv(const AblationTable& table);
std::string ablation_summary_csv(const AblationTable& table);

// Synthetic two-component seasonal mixture for the fusion-weight oracle.
struct SyntheticSignalSpec {
    std::int64_t samples = 100000;
    std::int64_t channels = 1;
    double var_s1 = 4.0;
    double var_s2 = 1.0;
    double noise_var = 1.0;
    double period_s1 = 25.0;
    double period_s2 = 10.0;
    std::uint64_t seed = 1;
};

struct AlphaStarResult {
    std::vector<double> grid;
    std::vector<double> mse_curve;
    double alpha_hat = 0.0;   // empirical argmin over the grid
    double alpha_star = 0.0;  // var_s2 / (var_s2 + noise_var)
    double mse_at_zero = 0.0;
    double mse_at_hat = 0.0;
};

// Sets y21 = s1 and y22 = s2 + n, sweeps the fusion weight over the grid and
// returns the empirical minimum next to the analytic optimum.
AlphaStarResult alpha_star_oracle(const SyntheticSignalSpec& spec,
                                  const std::vector<double>& grid);
std::vector<double> alpha_grid(double step);

// Paired training of twin models (gated fusion vs direct sum) on a synthetic
// series whose channels weight trend and seasonal content unequally.
struct EiaCheckConfig {
    std::uint64_t seed = 1;
    int epochs = 20;
    double lr = 2e-3;
    double epsilon = 0.02;
    std::int64_t samples = 1600;
    std::int64_t lookback = 48;
    std::int64_t horizon = 24;
    std::int64_t channels = 4;
};

struct EiaCheckResult {
    double loss_eia = 0.0, loss_add = 0.0;
    bool pass = false;
};

EiaCheckResult eia_noninferiority_check(const EiaCheckConfig& cfg);

// Series generator used by the check; exposed for tests.
Tensor synthetic_trend_seasonal_series(std::int64_t samples, std::int64_t channels,
                                       std::uint64_t seed);

// Per-channel truth/prediction rows for one window; the first L rows are
// context and carry no prediction.
void export_forecast(const ModelParams& params, const WindowedDataset& split,
                     std::int64_t window_index, const ModelConfig& cfg,
                     const std::string& csv_path, const std::string& svg_path = "");
std::string forecast_csv(const Tensor& truth /* [(L+Q) x C] */, const Tensor& pred /* [Q x C] */,
                         std::int64_t lookback, const std::vector<std::string>& names);
std::string forecast_svg(const Tensor& truth, const Tensor& pred, std::int64_t lookback,
                         const std::vector<std::string>& names);

// Max relative error between tape gradients and central differences for each
// parameter group of a model, maximized over seeds.
std::vector<std::pair<std::string, double>> model_gradient_check(
    const ModelConfig& cfg, const std::vector<std::uint64_t>& seeds, double eps);

} // namespace mdmlp
