#pragma once

#include <array>
#include <string>
#include <vector>

#include "mdmlp/ablation.hpp"
#include "mdmlp/training.hpp"

namespace mdmlp {

enum class MissingPolicy { Reject, Ffill };

// Multivariate series as loaded from disk; no missing values remain.
struct RawSeries {
    std::vector<std::string> timestamps; // empty when the file has no date column
    Tensor values;                       // [T x C]
    std::vector<std::string> channel_names;
    std::string source_path;
};

// First column named "date" (case-insensitive) is carried as timestamps and
// never fed to the model; all other columns parse as 64-bit reals.
RawSeries load_csv(const std::string& path, MissingPolicy policy = MissingPolicy::Reject);

void write_csv(const RawSeries& series, const std::string& path);

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    std::string data_path;
    std::string out_dir = "runs";
    std::string dataset_name; // derived from the file stem when empty
    std::array<double, 3> ratios{0.7, 0.2, 0.1};
    std::int64_t stride = 1;
    MissingPolicy missing = MissingPolicy::Reject;

    void validate() const;
    std::string resolved_dataset_name() const;
    std::string run_dir() const; // <out>/<dataset>_<L>_<Q>_<seed>
};

// Flat key=value lines, '#' comments; unknown keys and malformed values are
// rejected with the key named.
void apply_config_pair(RunConfig& cfg, const std::string& key, const std::string& value);
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

// Canonical serialization; parse_config_text(echo_config(c)) == c.
std::string echo_config(const RunConfig& cfg);

struct PipelineResult {
    std::string run_dir;
    TrainResult train;
    ForecastReport test_report;
};

// load -> split -> standardize -> window -> train -> evaluate -> emit.
PipelineResult run_pipeline(const RunConfig& cfg);

// Splits and windows for an already-loaded series under this config.
struct PreparedData {
    WindowedDataset train, val, test;
    StandardizeStats stats;
};
PreparedData prepare_data(const RawSeries& series, const RunConfig& cfg);

int run_cli(int argc, const char* const* argv);

} // namespace mdmlp
