#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "mdmlp/dataio.hpp"
#include "mdmlp/errors.hpp"

namespace mdmlp {

namespace {

struct CommonFlags {
    std::string config_file;
    std::vector<std::pair<std::string, std::string>> overrides;

    RunConfig build() const {
        RunConfig cfg;
        if (!config_file.empty()) cfg = parse_config_file(config_file);
        for (const auto& [k, v] : overrides) apply_config_pair(cfg, k, v);
        return cfg;
    }
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_file, "flat key=value config file");
    auto push = [&flags](const std::string& key) {
        return [&flags, key](const std::string& v) { flags.overrides.emplace_back(key, v); };
    };
    cmd->add_option_function<std::string>("--data", push("data"), "dataset CSV path");
    cmd->add_option_function<std::string>("--out", push("out"), "output directory");
    cmd->add_option_function<std::string>("--seed", push("seed"), "run seed");
    cmd->add_option_function<std::string>("--lookback", push("lookback"), "lookback length L");
    cmd->add_option_function<std::string>("--horizon", push("horizon"), "prediction horizon Q");
    cmd->add_option_function<std::string>("--channels", push("channels"), "channel count C");
    cmd->add_option_function<std::string>("--fusion", push("fusion"),
                                          "trend/seasonal fusion: add|mlp|agm|eia");
    cmd->add_option_function<std::string>("--seasonal-fusion", push("seasonal_fusion"),
                                          "seasonal fusion: azcf|wo_ws|mlp_f|dwl_f|cwa_f|rcf|ctf");
    cmd->add_option_function<std::string>("--capacity", push("capacity"),
                                          "capacity mode: dca or a fixed neuron count");
    cmd->add_option_function<std::string>("--epochs", push("epochs"), "training epochs");
    cmd->add_option_function<std::string>("--batch", push("batch_size"), "batch size");
    cmd->add_option_function<std::string>("--lr", push("base_lr"), "base learning rate");
    cmd->add_option_function<std::string>("--loss", push("loss"), "loss: mse|mae|arctan");
    cmd->add_option_function<std::string>("--patience", push("patience"), "early-stop patience");
    cmd->add_option_function<std::string>("--dropout", push("dropout"), "dropout for all branches");
    cmd->add_option_function<std::string>("--ema-a", push("ema_a"), "EMA smoothing factor");
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

int cmd_train(const CommonFlags& flags) {
    RunConfig cfg = flags.build();
    PipelineResult res = run_pipeline(cfg);
    std::printf("run_dir=%s\n", res.run_dir.c_str());
    std::printf("best_epoch=%d best_val_mse=%.6f\n", res.train.best_epoch, res.train.best_val_mse);
    std::printf("test mse=%.6f mae=%.6f windows=%lld\n", res.test_report.mse, res.test_report.mae,
                static_cast<long long>(res.test_report.windows));
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const CommonFlags& flags, const std::string& split) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    RunConfig cfg = parse_config_text(ckpt.config_echo);
    for (const auto& [k, v] : flags.overrides) apply_config_pair(cfg, k, v);
    if (cfg.data_path.empty()) throw ConfigError("no dataset given (key 'data')");

    RawSeries series = load_csv(cfg.data_path, cfg.missing);
    cfg.model.channels = series.values.dim(1);
    ModelParams params = params_from_checkpoint(ckpt, cfg.model);
    PreparedData data = prepare_data(series, cfg);
    const WindowedDataset& target = split == "train" ? data.train
                                  : split == "val"   ? data.val
                                                     : data.test;
    ForecastReport rep = evaluate(params, target, cfg.model);
    std::printf("split=%s mse=%.17g mae=%.17g windows=%lld\n", split.c_str(), rep.mse, rep.mae,
                static_cast<long long>(rep.windows));
    return 0;
}

int cmd_forecast(const std::string& ckpt_path, const CommonFlags& flags, const std::string& split,
                 std::int64_t window, const std::string& csv_out, const std::string& svg_out) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    RunConfig cfg = parse_config_text(ckpt.config_echo);
    for (const auto& [k, v] : flags.overrides) apply_config_pair(cfg, k, v);
    if (cfg.data_path.empty()) throw ConfigError("no dataset given (key 'data')");

    RawSeries series = load_csv(cfg.data_path, cfg.missing);
    cfg.model.channels = series.values.dim(1);
    ModelParams params = params_from_checkpoint(ckpt, cfg.model);
    PreparedData data = prepare_data(series, cfg);
    const WindowedDataset& target = split == "train" ? data.train
                                  : split == "val"   ? data.val
                                                     : data.test;
    export_forecast(params, target, window, cfg.model, csv_out, svg_out);
    std::printf("wrote %s%s%s\n", csv_out.c_str(), svg_out.empty() ? "" : " and ",
                svg_out.c_str());
    return 0;
}

int cmd_ablate(const CommonFlags& flags, const std::string& axis, const std::string& variants,
               const std::string& horizons, int reps, std::int64_t seed_base) {
    RunConfig cfg = flags.build();
    if (cfg.data_path.empty()) throw ConfigError("no dataset given (key 'data')");
    RawSeries series = load_csv(cfg.data_path, cfg.missing);

    AblationSpec spec;
    spec.axis = axis;
    if (!variants.empty()) {
        spec.variants = split_list(variants);
    } else if (axis == "seasonal") {
        spec.variants = {"wo_ws", "mlp_f", "dwl_f", "cwa_f", "rcf", "ctf", "azcf"};
    } else if (axis == "eia") {
        spec.variants = {"add", "mlp", "agm", "eia"};
    } else if (axis == "capacity") {
        spec.variants = {"32", "64", "128", "256", "512", "1024", "2048", "dca"};
    }
    for (const auto& h : split_list(horizons.empty() ? "96,192,336,720" : horizons)) {
        std::size_t pos = 0;
        std::int64_t v = 0;
        try {
            v = std::stoll(h, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != h.size() || v < 1)
            throw ConfigError("horizon list entry '" + h + "' is not a positive integer");
        spec.horizons.push_back(v);
    }
    spec.repetitions = reps;
    spec.seed_base = seed_base >= 0 ? static_cast<std::uint64_t>(seed_base) : cfg.train.seed;
    spec.model = cfg.model;
    spec.train = cfg.train;
    spec.ratios = cfg.ratios;
    spec.stride = cfg.stride;

    AblationTable table = run_ablation(spec, series.values);
    std::filesystem::create_directories(cfg.out_dir);
    const std::string cells_path = cfg.out_dir + "/ablation_" + axis + ".csv";
    const std::string summary_path = cfg.out_dir + "/ablation_" + axis + "_summary.csv";
    {
        std::ofstream os(cells_path, std::ios::trunc);
        os << ablation_csv(table);
    }
    {
        std::ofstream os(summary_path, std::ios::trunc);
        os << ablation_summary_csv(table);
    }
    std::printf("%s", ablation_summary_csv(table).c_str());
    std::printf("wrote %s and %s\n", cells_path.c_str(), summary_path.c_str());
    for (const auto& cell : table.cells)
        if (!cell.ok)
            std::fprintf(stderr, "cell %s/%lld/seed %llu failed: %s\n", cell.variant.c_str(),
                         static_cast<long long>(cell.horizon),
                         static_cast<unsigned long long>(cell.seed), cell.error.c_str());
    return 0;
}

int cmd_oracle(std::int64_t samples, double grid_step, double var_s2, double noise_var,
               const std::string& seeds, int epochs, bool alpha_only, bool eia_only) {
    bool all_pass = true;
    if (!eia_only) {
        SyntheticSignalSpec spec;
        spec.samples = samples;
        spec.var_s2 = var_s2;
        spec.noise_var = noise_var;
        AlphaStarResult r = alpha_star_oracle(spec, alpha_grid(grid_step));
        const double gain = r.mse_at_zero - r.mse_at_hat;
        const double expected = spec.noise_var + spec.var_s2 > 0.0
                                    ? spec.var_s2 * spec.var_s2 / (spec.var_s2 + spec.noise_var)
                                    : 0.0;
        std::printf("alpha_star=%.4f alpha_hat=%.4f mse0=%.6f mse_hat=%.6f gain=%.6f expected_gain=%.6f\n",
                    r.alpha_star, r.alpha_hat, r.mse_at_zero, r.mse_at_hat, gain, expected);
        const bool ok = std::fabs(r.alpha_hat - r.alpha_star) <= grid_step + 1e-12;
        std::printf("alpha check: %s\n", ok ? "PASS" : "FAIL");
        all_pass = all_pass && ok;
    }
    if (!alpha_only) {
        for (const auto& s : split_list(seeds.empty() ? "1,2,3" : seeds)) {
            std::uint64_t seed_v = 0;
            try {
                std::size_t pos = 0;
                seed_v = std::stoull(s, &pos);
                if (pos != s.size()) throw std::invalid_argument(s);
            } catch (const std::exception&) {
                throw ConfigError("seed list entry '" + s + "' is not an integer");
            }
            EiaCheckConfig cfg;
            cfg.seed = seed_v;
            cfg.epochs = epochs;
            EiaCheckResult r = eia_noninferiority_check(cfg);
            std::printf("seed %s: loss_eia=%.6f loss_add=%.6f %s\n", s.c_str(), r.loss_eia,
                        r.loss_add, r.pass ? "PASS" : "FAIL");
            all_pass = all_pass && r.pass;
        }
    }
    if (!all_pass) throw TrainingError("oracle checks failed");
    return 0;
}

int cmd_gradcheck(const CommonFlags& flags, int seeds, double eps, double tol) {
    RunConfig cfg = flags.build();
    std::vector<std::uint64_t> seed_list;
    for (int i = 1; i <= seeds; ++i) seed_list.push_back(static_cast<std::uint64_t>(i));
    auto per_group = model_gradient_check(cfg.model, seed_list, eps);
    double worst = 0.0;
    for (const auto& [name, err] : per_group) {
        std::printf("%-18s max_rel_err=%.3e\n", name.c_str(), err);
        worst = std::max(worst, err);
    }
    std::printf("worst=%.3e tol=%.1e\n", worst, tol);
    if (worst >= tol) throw TrainingError("gradient check failed");
    return 0;
}

int cmd_info(const CommonFlags& flags) {
    RunConfig cfg = flags.build();
    cfg.model.validate();
    const auto& m = cfg.model;
    std::printf("L=%lld Q=%lld C=%lld tau=%lld E=%lld n_h=%lld\n",
                static_cast<long long>(m.lookback), static_cast<long long>(m.horizon),
                static_cast<long long>(m.channels), static_cast<long long>(m.tau),
                static_cast<long long>(m.embed_dim), static_cast<long long>(m.base_neurons));
    std::printf("capacity=%s cof=%lld n1=%lld n2=%lld n3=%lld\n",
                m.capacity == CapacityMode::Dca ? "dca" : "fixed",
                static_cast<long long>(m.cof()), static_cast<long long>(m.n1()),
                static_cast<long long>(m.n2()), static_cast<long long>(m.n3()));
    Rng rng(m.seed);
    ModelParams params = init_params(m, rng);
    for (const auto& [name, t] : params.entries())
        std::printf("%-18s %-12s %lld\n", name.c_str(), shape_str(t->shape()).c_str(),
                    static_cast<long long>(t->size()));
    std::printf("total parameters: %lld\n", static_cast<long long>(params.parameter_count()));
    return 0;
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"MDMLP-EIA multivariate time-series forecaster"};
    app.require_subcommand(1);

    CommonFlags train_flags;
    auto* train_cmd = app.add_subcommand("train", "train a model and write a run directory");
    add_common(train_cmd, train_flags);

    CommonFlags eval_flags;
    std::string eval_ckpt, eval_split = "test";
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--split", eval_split, "train|val|test (default test)");
    add_common(eval_cmd, eval_flags);

    CommonFlags fc_flags;
    std::string fc_ckpt, fc_split = "test", fc_csv = "forecast.csv", fc_svg;
    std::int64_t fc_window = 0;
    auto* fc_cmd = app.add_subcommand("forecast", "export truth/prediction rows for one window");
    fc_cmd->add_option("--ckpt", fc_ckpt, "checkpoint path")->required();
    fc_cmd->add_option("--window", fc_window, "window index (default 0)");
    fc_cmd->add_option("--split", fc_split, "train|val|test (default test)");
    fc_cmd->add_option("--csv", fc_csv, "output CSV path");
    fc_cmd->add_option("--svg", fc_svg, "optional SVG chart path");
    add_common(fc_cmd, fc_flags);

    CommonFlags ab_flags;
    std::string ab_axis, ab_variants, ab_horizons;
    int ab_reps = 3;
    std::int64_t ab_seed_base = -1;
    auto* ab_cmd = app.add_subcommand("ablate", "variant sweep with paired seeds");
    ab_cmd->add_option("--axis", ab_axis, "seasonal|eia|capacity")->required();
    ab_cmd->add_option("--variants", ab_variants, "comma list (default: all for the axis)");
    ab_cmd->add_option("--horizons", ab_horizons, "comma list (default 96,192,336,720)");
    ab_cmd->add_option("--reps", ab_reps, "repetitions per cell (default 3)");
    ab_cmd->add_option("--seed-base", ab_seed_base, "base seed shared across variants");
    add_common(ab_cmd, ab_flags);

    std::int64_t or_samples = 100000;
    double or_grid = 0.01, or_var_s2 = 1.0, or_noise = 1.0;
    std::string or_seeds;
    int or_epochs = 20;
    bool or_alpha_only = false, or_eia_only = false;
    auto* or_cmd = app.add_subcommand("oracle", "synthetic fusion-weight and gated-fusion checks");
    or_cmd->add_option("--samples", or_samples, "sample count (default 100000)");
    or_cmd->add_option("--grid-step", or_grid, "alpha grid step (default 0.01)");
    or_cmd->add_option("--var-s2", or_var_s2, "weak component variance (default 1)");
    or_cmd->add_option("--noise-var", or_noise, "noise variance (default 1)");
    or_cmd->add_option("--seeds", or_seeds, "comma list for the paired-training check");
    or_cmd->add_option("--epochs", or_epochs, "paired-training epochs (default 20)");
    or_cmd->add_flag("--alpha-only", or_alpha_only, "skip the paired-training check");
    or_cmd->add_flag("--eia-only", or_eia_only, "skip the fusion-weight sweep");

    CommonFlags gc_flags;
    int gc_seeds = 10;
    double gc_eps = 1e-5, gc_tol = 1e-4;
    auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference audit of model gradients");
    gc_cmd->add_option("--seeds", gc_seeds, "number of seeds (default 10)");
    gc_cmd->add_option("--eps", gc_eps, "finite-difference step (default 1e-5)");
    gc_cmd->add_option("--tol", gc_tol, "max relative error tolerance (default 1e-4)");
    add_common(gc_cmd, gc_flags);

    CommonFlags info_flags;
    auto* info_cmd = app.add_subcommand("info", "capacity sizing and parameter counts");
    add_common(info_cmd, info_flags);

    try {
        app.parse(argc, argv);
        if (train_cmd->parsed()) return cmd_train(train_flags);
        if (eval_cmd->parsed()) return cmd_eval(eval_ckpt, eval_flags, eval_split);
        if (fc_cmd->parsed())
            return cmd_forecast(fc_ckpt, fc_flags, fc_split, fc_window, fc_csv, fc_svg);
        if (ab_cmd->parsed())
            return cmd_ablate(ab_flags, ab_axis, ab_variants, ab_horizons, ab_reps, ab_seed_base);
        if (or_cmd->parsed())
            return cmd_oracle(or_samples, or_grid, or_var_s2, or_noise, or_seeds, or_epochs,
                              or_alpha_only, or_eia_only);
        if (gc_cmd->parsed()) return cmd_gradcheck(gc_flags, gc_seeds, gc_eps, gc_tol);
        if (info_cmd->parsed()) return cmd_info(info_flags);
        return 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

} // namespace mdmlp
