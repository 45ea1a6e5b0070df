#include "mdmlp/dataio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mdmlp/errors.hpp"

namespace mdmlp {

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size();
}

} // namespace

RawSeries load_csv(const std::string& path, MissingPolicy policy) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open dataset: " + path);

    std::string line;
    if (!std::getline(is, line)) throw DataError("empty file: " + path);
    auto header = split_fields(line);
    if (header.empty()) throw DataError("unparseable header in " + path);
    for (auto& h : header) h = trim(h);

    const bool has_date = lower(header.front()) == "date";
    const std::size_t first_channel = has_date ? 1 : 0;
    const std::int64_t channels = static_cast<std::int64_t>(header.size() - first_channel);
    if (channels < 1) throw DataError("no channel columns in " + path);

    RawSeries out;
    out.source_path = path;
    out.channel_names.assign(header.begin() + static_cast<std::ptrdiff_t>(first_channel),
                             header.end());

    std::vector<double> data;
    std::vector<double> prev_row(static_cast<std::size_t>(channels));
    std::int64_t rows = 0;
    std::int64_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != header.size())
            throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        if (has_date) out.timestamps.push_back(trim(fields[0]));
        for (std::int64_t c = 0; c < channels; ++c) {
            const std::string& cell = fields[first_channel + static_cast<std::size_t>(c)];
            double v;
            if (!parse_double(cell, v)) {
                if (policy == MissingPolicy::Reject)
                    throw DataError(path + ":" + std::to_string(line_no) + ": column '" +
                                    out.channel_names[static_cast<std::size_t>(c)] +
                                    "' is not numeric ('" + trim(cell) + "')");
                if (rows == 0)
                    throw DataError(path + ":" + std::to_string(line_no) +
                                    ": cannot forward-fill the first row");
                v = prev_row[static_cast<std::size_t>(c)];
            }
            data.push_back(v);
            prev_row[static_cast<std::size_t>(c)] = v;
        }
        ++rows;
    }
    if (rows < 2) throw DataError(path + ": need at least 2 data rows, got " + std::to_string(rows));
    out.values = Tensor::from({rows, channels}, std::move(data));
    return out;
}

void write_csv(const RawSeries& series, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write " + path);
    const bool has_date = !series.timestamps.empty();
    if (has_date) os << "date";
    for (std::size_t c = 0; c < series.channel_names.size(); ++c) {
        if (has_date || c > 0) os << ",";
        os << series.channel_names[c];
    }
    os << "\n";
    const auto rows = series.values.dim(0), cols = series.values.dim(1);
    auto d = series.values.data();
    char buf[64];
    for (std::int64_t r = 0; r < rows; ++r) {
        if (has_date) os << series.timestamps[static_cast<std::size_t>(r)];
        for (std::int64_t c = 0; c < cols; ++c) {
            if (has_date || c > 0) os << ",";
            std::snprintf(buf, sizeof(buf), "%.17g", d[r * cols + c]);
            os << buf;
        }
        os << "\n";
    }
}

void RunConfig::validate() const {
    model.validate();
    train.validate();
    if (stride < 1) throw ConfigError("stride must be >= 1");
    const double total = ratios[0] + ratios[1] + ratios[2];
    if (std::fabs(total - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
}

std::string RunConfig::resolved_dataset_name() const {
    if (!dataset_name.empty()) return dataset_name;
    if (data_path.empty()) return "dataset";
    return std::filesystem::path(data_path).stem().string();
}

std::string RunConfig::run_dir() const {
    return out_dir + "/" + resolved_dataset_name() + "_" + std::to_string(model.lookback) + "_" +
           std::to_string(model.horizon) + "_" + std::to_string(train.seed);
}

namespace {

std::int64_t parse_int(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    std::int64_t v = 0;
    try {
        v = std::stoll(value, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != value.size()) throw ConfigError("key '" + key + "': expected integer, got '" + value + "'");
    return v;
}

double parse_real(const std::string& key, const std::string& value) {
    double v;
    if (!parse_double(value, v))
        throw ConfigError("key '" + key + "': expected number, got '" + value + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("key '" + key + "': expected true|false, got '" + value + "'");
}

} // namespace

void apply_config_pair(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "data") cfg.data_path = value;
    else if (key == "out") cfg.out_dir = value;
    else if (key == "dataset_name") cfg.dataset_name = value;
    else if (key == "lookback") cfg.model.lookback = parse_int(key, value);
    else if (key == "horizon") cfg.model.horizon = parse_int(key, value);
    else if (key == "channels") cfg.model.channels = parse_int(key, value);
    else if (key == "embed_dim") cfg.model.embed_dim = parse_int(key, value);
    else if (key == "base_neurons") cfg.model.base_neurons = parse_int(key, value);
    else if (key == "tau") cfg.model.tau = parse_int(key, value);
    else if (key == "dropout") {
        const double p = parse_real(key, value);
        cfg.model.dropout_trend = cfg.model.dropout_strong = p;
        cfg.model.dropout_weak = cfg.model.dropout_eia = p;
    }
    else if (key == "dropout_trend") cfg.model.dropout_trend = parse_real(key, value);
    else if (key == "dropout_strong") cfg.model.dropout_strong = parse_real(key, value);
    else if (key == "dropout_weak") cfg.model.dropout_weak = parse_real(key, value);
    else if (key == "dropout_eia") cfg.model.dropout_eia = parse_real(key, value);
    else if (key == "fusion") cfg.model.fusion = fusion_from_string(value);
    else if (key == "seasonal_fusion") cfg.model.seasonal_fusion = seasonal_fusion_from_string(value);
    else if (key == "capacity") {
        if (value == "dca") {
            cfg.model.capacity = CapacityMode::Dca;
        } else {
            cfg.model.capacity = CapacityMode::Fixed;
            cfg.model.fixed_neurons = parse_int(key, value);
        }
    }
    else if (key == "ema_a") cfg.model.ema_a = parse_real(key, value);
    else if (key == "softshrink_lambda") cfg.model.shrink_lambda = parse_real(key, value);
    else if (key == "leaky_slope") cfg.model.leaky_slope = parse_real(key, value);
    else if (key == "gelu_exact") cfg.model.gelu_exact = parse_bool(key, value);
    else if (key == "revin_affine") cfg.model.revin_affine = parse_bool(key, value);
    else if (key == "revin_eps") cfg.model.revin_eps = parse_real(key, value);
    else if (key == "seed") {
        const auto s = parse_int(key, value);
        if (s < 0) throw ConfigError("key 'seed': must be >= 0");
        cfg.model.seed = static_cast<std::uint64_t>(s);
        cfg.train.seed = static_cast<std::uint64_t>(s);
    }
    else if (key == "epochs") cfg.train.epochs = static_cast<int>(parse_int(key, value));
    else if (key == "batch_size") cfg.train.batch_size = parse_int(key, value);
    else if (key == "base_lr") cfg.train.base_lr = parse_real(key, value);
    else if (key == "lr_k") cfg.train.lr_k = parse_real(key, value);
    else if (key == "lr_w") cfg.train.lr_w = parse_real(key, value);
    else if (key == "weight_decay") cfg.train.weight_decay = parse_real(key, value);
    else if (key == "loss") cfg.train.loss = loss_from_string(value);
    else if (key == "patience") cfg.train.patience = static_cast<int>(parse_int(key, value));
    else if (key == "clip_norm") cfg.train.clip_norm = parse_real(key, value);
    else if (key == "split_train") cfg.ratios[0] = parse_real(key, value);
    else if (key == "split_val") cfg.ratios[1] = parse_real(key, value);
    else if (key == "split_test") cfg.ratios[2] = parse_real(key, value);
    else if (key == "stride") cfg.stride = parse_int(key, value);
    else if (key == "missing_policy") {
        if (value == "reject") cfg.missing = MissingPolicy::Reject;
        else if (value == "ffill") cfg.missing = MissingPolicy::Ffill;
        else throw ConfigError("key 'missing_policy': expected reject|ffill, got '" + value + "'");
    }
    else throw ConfigError("unknown config key '" + key + "'");

    // Constraint checks that have a natural home here rather than validate().
    if (key == "tau" && cfg.model.tau < 1) throw ConfigError("key 'tau': must be >= 1");
    if (key == "epochs" && cfg.train.epochs < 1) throw ConfigError("key 'epochs': must be >= 1");
    if (key == "patience" && cfg.train.patience < 1) throw ConfigError("key 'patience': must be >= 1");
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
        apply_config_pair(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open config: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str());
}

std::string echo_config(const RunConfig& cfg) {
    std::ostringstream os;
    char buf[64];
    auto real = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    os << "data=" << cfg.data_path << "\n";
    os << "out=" << cfg.out_dir << "\n";
    os << "dataset_name=" << cfg.resolved_dataset_name() << "\n";
    os << "lookback=" << cfg.model.lookback << "\n";
    os << "horizon=" << cfg.model.horizon << "\n";
    os << "channels=" << cfg.model.channels << "\n";
    os << "embed_dim=" << cfg.model.embed_dim << "\n";
    os << "base_neurons=" << cfg.model.base_neurons << "\n";
    os << "tau=" << cfg.model.tau << "\n";
    os << "dropout_trend=" << real(cfg.model.dropout_trend) << "\n";
    os << "dropout_strong=" << real(cfg.model.dropout_strong) << "\n";
    os << "dropout_weak=" << real(cfg.model.dropout_weak) << "\n";
    os << "dropout_eia=" << real(cfg.model.dropout_eia) << "\n";
    os << "fusion=" << fusion_name(cfg.model.fusion) << "\n";
    os << "seasonal_fusion=" << seasonal_fusion_name(cfg.model.seasonal_fusion) << "\n";
    os << "capacity="
       << (cfg.model.capacity == CapacityMode::Dca ? std::string("dca")
                                                   : std::to_string(cfg.model.fixed_neurons))
       << "\n";
    os << "ema_a=" << real(cfg.model.ema_a) << "\n";
    os << "softshrink_lambda=" << real(cfg.model.shrink_lambda) << "\n";
    os << "leaky_slope=" << real(cfg.model.leaky_slope) << "\n";
    os << "gelu_exact=" << (cfg.model.gelu_exact ? "true" : "false") << "\n";
    os << "revin_affine=" << (cfg.model.revin_affine ? "true" : "false") << "\n";
    os << "revin_eps=" << real(cfg.model.revin_eps) << "\n";
    os << "seed=" << cfg.train.seed << "\n";
    os << "epochs=" << cfg.train.epochs << "\n";
    os << "batch_size=" << cfg.train.batch_size << "\n";
    os << "base_lr=" << real(cfg.train.base_lr) << "\n";
    os << "lr_k=" << real(cfg.train.lr_k) << "\n";
    os << "lr_w=" << real(cfg.train.lr_w) << "\n";
    os << "weight_decay=" << real(cfg.train.weight_decay) << "\n";
    os << "loss=" << loss_name(cfg.train.loss) << "\n";
    os << "patience=" << cfg.train.patience << "\n";
    os << "clip_norm=" << real(cfg.train.clip_norm) << "\n";
    os << "split_train=" << real(cfg.ratios[0]) << "\n";
    os << "split_val=" << real(cfg.ratios[1]) << "\n";
    os << "split_test=" << real(cfg.ratios[2]) << "\n";
    os << "stride=" << cfg.stride << "\n";
    os << "missing_policy=" << (cfg.missing == MissingPolicy::Reject ? "reject" : "ffill") << "\n";
    return os.str();
}

PreparedData prepare_data(const RawSeries& series, const RunConfig& cfg) {
    SplitSeries splits = split_dataset(series.values, cfg.ratios, cfg.model.lookback,
                                       cfg.model.horizon);
    PreparedData out;
    out.stats = standardize_global(splits);
    out.train = make_windows(splits.train, cfg.model.lookback, cfg.model.horizon, cfg.stride,
                             "train", series.channel_names);
    out.val = make_windows(splits.val, cfg.model.lookback, cfg.model.horizon, cfg.stride, "val",
                           series.channel_names);
    out.test = make_windows(splits.test, cfg.model.lookback, cfg.model.horizon, cfg.stride, "test",
                            series.channel_names);
    return out;
}

PipelineResult run_pipeline(const RunConfig& cfg_in) {
    RunConfig cfg = cfg_in;
    if (cfg.data_path.empty()) throw ConfigError("no dataset given (key 'data')");
    RawSeries series = load_csv(cfg.data_path, cfg.missing);
    cfg.model.channels = series.values.dim(1);
    cfg.validate();

    PreparedData data = prepare_data(series, cfg);
    TrainResult tr = train_model(data.train, data.val, cfg.model, cfg.train);
    ForecastReport report = evaluate(tr.params, data.test, cfg.model);

    PipelineResult out;
    out.run_dir = cfg.run_dir();
    emit_run_dir(out.run_dir, echo_config(cfg), tr);
    {
        std::ofstream os(out.run_dir + "/report.csv", std::ios::trunc);
        if (!os) throw DataError("cannot write " + out.run_dir + "/report.csv");
        char buf[128];
        os << "split,mse,mae,windows\n";
        std::snprintf(buf, sizeof(buf), "test,%.17g,%.17g,%lld\n", report.mse, report.mae,
                      static_cast<long long>(report.windows));
        os << buf;
    }
    out.train = std::move(tr);
    out.test_report = report;
    return out;
}

} // namespace mdmlp
