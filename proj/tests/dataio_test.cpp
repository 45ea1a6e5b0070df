#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mdmlp/dataio.hpp"
#include "mdmlp/errors.hpp"

using namespace mdmlp;

namespace {

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "mdmlp_dataio_test";
    std::filesystem::create_directories(dir);
    return dir;
}

std::string write_file(const std::string& name, const std::string& content) {
    const auto path = temp_dir() / name;
    std::ofstream os(path, std::ios::trunc);
    os << content;
    return path.string();
}

std::string slurp(const std::string& path) {
    std::ifstream is(path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// Synthetic CSV fixture in the ETT layout: date column plus channels.
std::string fixture_csv(std::int64_t rows, std::uint64_t seed) {
    Rng rng(seed);
    std::string out = "date,ch1,ch2\n";
    char buf[128];
    for (std::int64_t t = 0; t < rows; ++t) {
        const double a = std::sin(2.0 * M_PI * static_cast<double>(t) / 24.0) +
                         0.01 * static_cast<double>(t) + 0.05 * rng.normal();
        const double b = std::cos(2.0 * M_PI * static_cast<double>(t) / 12.0) + 0.05 * rng.normal();
        std::snprintf(buf, sizeof(buf), "2020-01-01 %02lld:00:00,%.17g,%.17g\n",
                      static_cast<long long>(t % 24), a, b);
        out += buf;
    }
    return out;
}

} // namespace

TEST_SUITE_BEGIN("dataio");

TEST_CASE("csv fixture loads with names and timestamps") {
    const auto path = write_file("small.csv", "date,a,b\nd1,1,2\nd2,3,4\nd3,5,6\n");
    RawSeries s = load_csv(path);
    CHECK(s.values.shape() == Shape{3, 2});
    CHECK(s.channel_names == std::vector<std::string>{"a", "b"});
    CHECK(s.timestamps.size() == 3);
    CHECK(s.timestamps[1] == "d2");
    CHECK(s.values.at({2, 1}) == 6.0);
}

TEST_CASE("csv without a date column") {
    const auto path = write_file("nodate.csv", "x,y\n1.5,2\n2.5,3\n");
    RawSeries s = load_csv(path);
    CHECK(s.values.shape() == Shape{2, 2});
    CHECK(s.timestamps.empty());
    CHECK(s.values.at({0, 0}) == 1.5);
}

TEST_CASE("windows-style line endings parse cleanly") {
    const auto path = write_file("crlf.csv", "date,a,b\r\nd1,1,2\r\nd2,3,4\r\n");
    RawSeries s = load_csv(path);
    CHECK(s.values.shape() == Shape{2, 2});
    CHECK(s.channel_names == std::vector<std::string>{"a", "b"});
    CHECK(s.values.at({1, 1}) == 4.0);
}

TEST_CASE("missing values per policy") {
    const auto path = write_file("gap.csv", "date,a,b\nd1,1,2\nd2,,4\nd3,5,6\n");
    CHECK_THROWS_WITH_AS(load_csv(path, MissingPolicy::Reject),
                         doctest::Contains("column 'a'"), DataError);
    RawSeries filled = load_csv(path, MissingPolicy::Ffill);
    CHECK(filled.values.at({1, 0}) == 1.0);
    CHECK(filled.values.at({1, 1}) == 4.0);

    const auto first = write_file("gapfirst.csv", "date,a\nd1,\nd2,2\n");
    CHECK_THROWS_AS(load_csv(first, MissingPolicy::Ffill), DataError);
}

TEST_CASE("malformed rows name the line") {
    const auto path = write_file("badrow.csv", "date,a,b\nd1,1,2\nd2,3\n");
    CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains(":3"), DataError);
    const auto bad = write_file("badcell.csv", "date,a,b\nd1,1,2\nd2,zzz,4\n");
    CHECK_THROWS_WITH_AS(load_csv(bad), doctest::Contains("column 'a'"), DataError);
    CHECK_THROWS_AS(load_csv((temp_dir() / "missing.csv").string()), DataError);
    const auto tiny = write_file("tiny.csv", "date,a\nd1,1\n");
    CHECK_THROWS_AS(load_csv(tiny), DataError);
}

TEST_CASE("clean files reload losslessly") {
    const std::string text = "date,a,b\nd1,0.5,-7.125\nd2,3,0.25\nd3,1.5,2\n";
    const auto path = write_file("dyadic.csv", text);
    RawSeries s = load_csv(path);
    const auto out = (temp_dir() / "dyadic_out.csv").string();
    write_csv(s, out);
    CHECK(slurp(out) == text);

    RawSeries round = load_csv(out);
    for (std::int64_t i = 0; i < s.values.size(); ++i)
        CHECK(round.values.data()[static_cast<std::size_t>(i)] ==
              s.values.data()[static_cast<std::size_t>(i)]);
}

TEST_CASE("config defaults, overrides and rejection") {
    RunConfig cfg = parse_config_text("");
    CHECK(cfg.model.lookback == 96);
    CHECK(cfg.model.horizon == 96);
    CHECK(cfg.model.tau == 5);
    CHECK(cfg.model.embed_dim == 8);
    CHECK(cfg.model.base_neurons == 256);
    CHECK(cfg.model.fusion == FusionMode::Eia);
    CHECK(cfg.model.seasonal_fusion == SeasonalFusionMode::Azcf);
    CHECK(cfg.ratios[0] == 0.7);
    CHECK(cfg.train.epochs == 30);
    CHECK(cfg.train.patience == 5);
    CHECK(cfg.train.base_lr == 5e-3);
    CHECK(cfg.train.weight_decay == 1e-4);
    CHECK(cfg.train.batch_size == 32);

    RunConfig o = parse_config_text("horizon=336\nfusion=agm\ncapacity=128\nseed=9\n");
    CHECK(o.model.horizon == 336);
    CHECK(o.model.fusion == FusionMode::Agm);
    CHECK(o.model.capacity == CapacityMode::Fixed);
    CHECK(o.model.fixed_neurons == 128);
    CHECK(o.train.seed == 9);
    CHECK(o.model.seed == 9);

    CHECK_THROWS_WITH_AS(parse_config_text("tau=0\n"), doctest::Contains("tau"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("frobnicate=1\n"),
                         doctest::Contains("frobnicate"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("epochs=abc\n"), doctest::Contains("epochs"),
                         ConfigError);
    CHECK_THROWS_AS(parse_config_text("loss=huber\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("keyonly\n"), ConfigError);

    RunConfig cm = parse_config_text("# comment line\ndropout=0.2\n");
    CHECK(cm.model.dropout_trend == 0.2);
    CHECK(cm.model.dropout_eia == 0.2);
}

TEST_CASE("config echo round trips") {
    RunConfig cfg = parse_config_text(
        "data=/tmp/x.csv\nhorizon=192\nlookback=48\nseed=3\nloss=arctan\ncapacity=64\n"
        "revin_affine=true\nsplit_train=0.6\nsplit_val=0.3\nsplit_test=0.1\nmissing_policy=ffill\n");
    const std::string echo = echo_config(cfg);
    RunConfig back = parse_config_text(echo);
    CHECK(echo_config(back) == echo);
    CHECK(back.model.horizon == 192);
    CHECK(back.train.loss == LossKind::Arctan);
    CHECK(back.missing == MissingPolicy::Ffill);
    CHECK(back.ratios[1] == 0.3);
}

TEST_CASE("run directory naming") {
    RunConfig cfg;
    cfg.data_path = "/data/ETTh1.csv";
    cfg.out_dir = "runs";
    cfg.model.lookback = 96;
    cfg.model.horizon = 192;
    cfg.train.seed = 4;
    CHECK(cfg.run_dir() == "runs/ETTh1_96_192_4");
    cfg.dataset_name = "custom";
    CHECK(cfg.run_dir() == "runs/custom_96_192_4");
}

TEST_CASE("pipeline trains, evaluates and reruns the checkpoint identically") {
    const auto dir = temp_dir() / "pipeline";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const auto data = write_file("pipeline/train_me.csv", fixture_csv(320, 17));

    RunConfig cfg = parse_config_text(
        "lookback=16\nhorizon=4\nepochs=3\npatience=3\nbatch_size=16\nbase_lr=0.002\nseed=5\n"
        "base_neurons=16\n");
    cfg.data_path = data;
    cfg.out_dir = (dir / "runs").string();

    PipelineResult res = run_pipeline(cfg);
    CHECK(std::filesystem::exists(res.run_dir + "/config.txt"));
    CHECK(std::filesystem::exists(res.run_dir + "/history.csv"));
    CHECK(std::filesystem::exists(res.run_dir + "/best.ckpt"));
    CHECK(std::filesystem::exists(res.run_dir + "/best.ckpt.txt"));
    CHECK(std::filesystem::exists(res.run_dir + "/report.csv"));

    // the echoed config reparses to the resolved run configuration
    RunConfig echoed = parse_config_file(res.run_dir + "/config.txt");
    CHECK(echoed.model.lookback == 16);
    CHECK(echoed.model.channels == 2);

    // evaluating the stored checkpoint on the val split reproduces best_val_mse
    Checkpoint ck = load_checkpoint(res.run_dir + "/best.ckpt");
    RunConfig ecfg = parse_config_text(ck.config_echo);
    RawSeries series = load_csv(ecfg.data_path, ecfg.missing);
    ecfg.model.channels = series.values.dim(1);
    ModelParams params = params_from_checkpoint(ck, ecfg.model);
    PreparedData prepared = prepare_data(series, ecfg);
    ForecastReport val = evaluate(params, prepared.val, ecfg.model);
    CHECK(val.mse == res.train.best_val_mse);
}

TEST_CASE("cli subcommands cover the pipeline surface") {
    const auto dir = temp_dir() / "cli";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const auto data = write_file("cli/set.csv", fixture_csv(300, 23));
    const std::string out = (dir / "runs").string();

    auto run = [&](std::vector<std::string> args) {
        std::vector<const char*> argv{"mdmlp"};
        for (const auto& a : args) argv.push_back(a.c_str());
        return run_cli(static_cast<int>(argv.size()), argv.data());
    };

    CHECK(run({"nosuchcommand"}) == 1);
    CHECK(run({"info", "--channels", "862", "--lookback", "96"}) == 0);
    CHECK(run({"train", "--data", (temp_dir() / "absent.csv").string()}) == 2);
    CHECK(run({"train", "--data", data, "--lookback", "abc"}) == 1);

    CHECK(run({"train", "--data", data, "--out", out, "--lookback", "16", "--horizon", "4",
               "--epochs", "2", "--batch", "16", "--seed", "3"}) == 0);
    const std::string run_dir = out + "/set_16_4_3";
    REQUIRE(std::filesystem::exists(run_dir + "/best.ckpt"));

    CHECK(run({"eval", "--ckpt", run_dir + "/best.ckpt", "--split", "test"}) == 0);
    CHECK(run({"forecast", "--ckpt", run_dir + "/best.ckpt", "--window", "0", "--csv",
               (dir / "fc.csv").string(), "--svg", (dir / "fc.svg").string()}) == 0);
    CHECK(std::filesystem::exists(dir / "fc.csv"));
    CHECK(std::filesystem::exists(dir / "fc.svg"));

    CHECK(run({"ablate", "--data", data, "--axis", "eia", "--variants", "add,eia", "--horizons",
               "4", "--reps", "1", "--seed-base", "2", "--out", out, "--lookback", "16",
               "--epochs", "2", "--batch", "16"}) == 0);
    CHECK(std::filesystem::exists(out + "/ablation_eia.csv"));
    CHECK(std::filesystem::exists(out + "/ablation_eia_summary.csv"));

    CHECK(run({"oracle", "--alpha-only", "--samples", "20000"}) == 0);
    CHECK(run({"gradcheck", "--lookback", "8", "--horizon", "4", "--channels", "2", "--seeds",
               "1", "--config", write_file("cli/gc.cfg", "base_neurons=8\n")}) == 0);
}

TEST_SUITE_END();
