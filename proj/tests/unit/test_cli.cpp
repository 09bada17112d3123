#include <doctest.h>

#include <fstream>
#include <sstream>

#include "dgnaea/cli.hpp"
#include "dgnaea/forecaster.hpp"
#include "dgnaea/run_config.hpp"
#include "support/fixtures.hpp"

using namespace dgnaea;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "dgnaea");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

// Small synthetic problem: 5 stations, 120 steps, 1-epoch training.
const char* kSmallConfig =
    "n_stations = 5\n"
    "n_steps = 120\n"
    "burn_in = 10\n"
    "max_distance_km = 400\n"
    "horizon = 3\n"
    "edge_hidden = 4\n"
    "hidden = 4\n"
    "max_epochs = 1\n"
    "batch_size = 16\n"
    "eval_horizons = 3,6\n";

} // namespace

TEST_CASE("config parsing: defaults, comments, lists and errors") {
    const RunConfig c = RunConfig::parse("# header\nlr = 1e-3  # inline\nseeds = 0..3\nvariant=only_wind\n");
    CHECK(c.get_double("lr") == 1e-3);
    CHECK(c.get_u64_list("seeds") == std::vector<std::uint64_t>{0, 1, 2, 3});
    CHECK(c.variants().size() == 5);
    CHECK(c.model_config(7).variant == Variant::OnlyWind);
    CHECK(c.model_config(7).seed == 7);
    CHECK(c.is_default("hidden"));
    CHECK_FALSE(c.is_default("lr"));
    CHECK(c.train_config(0).batch_size == 32);
    CHECK(RunConfig().get_size_list("eval_horizons") == std::vector<std::size_t>{3, 6, 12, 24});

    try {
        RunConfig::parse("hidden = 4\nlearning_rate = 0.1\n", "run.cfg");
        FAIL("unknown key accepted");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("learning_rate") != std::string::npos);
        CHECK(msg.find("run.cfg:2") != std::string::npos);
    }
    CHECK_THROWS_AS(RunConfig::parse("hidden\n"), std::invalid_argument);
    CHECK_THROWS_AS(RunConfig::parse("hidden = 4\nhidden = 5\n"), std::invalid_argument);
    CHECK_THROWS_AS(RunConfig::parse("hidden = four\n").get_size("hidden"), std::invalid_argument);
}

TEST_CASE("resolved config lists every key and parses back") {
    RunConfig c;
    c.set("hidden", "7");
    const RunConfig back = RunConfig::parse(c.resolved());
    for (const auto& k : config_keys())
        CHECK(back.get(k.name) == c.get(k.name));
}

TEST_CASE("help exits cleanly and a missing subcommand is an error") {
    CHECK(cli({"--help"}).code == kExitOk);
    CHECK(cli({}).code == kExitInvalid);
    CHECK(cli({"frobnicate"}).code == kExitInvalid);
    CHECK(cli({"build-graph"}).code == kExitInvalid);  // --out missing
}

TEST_CASE("build-graph writes the topology and handles edge cases") {
    fixtures::TempDir dir;
    write_stations_csv(dir / "one.csv", fixtures::make_stations(1));
    const Run one = cli({"build-graph", "--stations", (dir / "one.csv").string(), "--out", (dir / "g1").string()});
    CHECK(one.code == kExitInvalid);
    CHECK(one.err.find("at least 2 stations") != std::string::npos);

    write_stations_csv(dir / "four.csv", fixtures::make_stations(4));
    const Run four = cli({"build-graph", "--stations", (dir / "four.csv").string(), "--out", (dir / "g4").string()});
    CHECK(four.code == kExitOk);
    CHECK(fs::exists(dir / "g4" / "topology.csv"));
    CHECK(fs::exists(dir / "g4" / "run_config.txt"));
    CHECK(slurp(dir / "g4" / "graph_summary.txt").rfind("nodes = 4\n", 0) == 0);

    const Run missing =
        cli({"build-graph", "--stations", (dir / "nope.csv").string(), "--out", (dir / "g0").string()});
    CHECK(missing.code == kExitInvalid);
    CHECK(!missing.err.empty());
}

TEST_CASE("gen-synthetic is byte-reproducible and refuses unstable settings") {
    fixtures::TempDir dir;
    write_file(dir / "c.cfg", kSmallConfig);
    const std::string cfg = (dir / "c.cfg").string();
    REQUIRE(cli({"gen-synthetic", "--config", cfg, "--seed", "3", "--out", (dir / "a").string()}).code == kExitOk);
    REQUIRE(cli({"gen-synthetic", "--config", cfg, "--seed", "3", "--out", (dir / "b").string()}).code == kExitOk);
    for (const char* f : {"stations.csv", "series.csv", "topology.csv", "planted_edges.csv", "synthetic_summary.txt"})
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));

    REQUIRE(cli({"gen-synthetic", "--config", cfg, "--conservation", "--out", (dir / "c").string()}).code ==
            kExitOk);
    CHECK(slurp(dir / "c" / "run_config.txt").find("conservation = true") != std::string::npos);
    const std::string summary = slurp(dir / "c" / "synthetic_summary.txt");
    const auto at = summary.find("mass_drift = ");
    REQUIRE(at != std::string::npos);
    CHECK(std::stod(summary.substr(at + 13)) < 1e-9);

    write_file(dir / "bad.cfg", std::string(kSmallConfig) + "coeff_scale = 1e5\nzero_fraction = 0\n");
    const Run bad = cli({"gen-synthetic", "--config", (dir / "bad.cfg").string(), "--out", (dir / "d").string()});
    CHECK(bad.code == kExitInvalid);
    CHECK(bad.err.find("unstable") != std::string::npos);

    write_file(dir / "typo.cfg", "n_station = 5\n");
    CHECK(cli({"gen-synthetic", "--config", (dir / "typo.cfg").string(), "--out", (dir / "e").string()}).code ==
          kExitInvalid);
}

TEST_CASE("train, evaluate and analyze on a small synthetic run") {
    fixtures::TempDir dir;
    write_file(dir / "c.cfg", kSmallConfig);
    const std::string cfg = (dir / "c.cfg").string();
    REQUIRE(cli({"gen-synthetic", "--config", cfg, "--out", (dir / "data").string()}).code == kExitOk);
    const std::string stations = (dir / "data" / "stations.csv").string();
    const std::string series = (dir / "data" / "series.csv").string();
    const std::vector<std::string> inputs = {"--config", cfg, "--stations", stations, "--series", series};

    auto with = [&](std::vector<std::string> head, std::vector<std::string> tail = {}) {
        head.insert(head.end(), inputs.begin(), inputs.end());
        head.insert(head.end(), tail.begin(), tail.end());
        return cli(head);
    };

    const Run tr = with({"train", "--out", (dir / "run").string()});
    REQUIRE(tr.code == kExitOk);
    for (const char* f : {"seed_0/checkpoint.json", "seed_0/history.csv", "seed_0/metrics.csv",
                          "seed_0/run_config.txt", "metrics_summary.csv", "ha_metrics.csv", "run_config.txt"})
        CHECK(fs::exists(dir / "run" / f));
    CHECK(slurp(dir / "run" / "seed_0" / "history.csv").rfind("epoch,train_mse,val_mse\n", 0) == 0);

    const Run again = with({"train", "--out", (dir / "run").string()});
    CHECK(again.code == kExitInvalid);
    CHECK(again.err.find("--force") != std::string::npos);
    CHECK(with({"train", "--force", "--out", (dir / "run").string()}).code == kExitOk);

    const std::string ckpt = (dir / "run" / "seed_0" / "checkpoint.json").string();
    const Run ev = with({"evaluate", "--checkpoint", ckpt, "--out", (dir / "ev").string()});
    CHECK(ev.code == kExitOk);
    CHECK(slurp(dir / "ev" / "metrics.csv").rfind("horizon,mae,rmse\n3,", 0) == 0);
    // The 24-step test split cannot hold a 24-step window plus its origin.
    const Run long_h = with({"evaluate", "--checkpoint", ckpt, "--horizons", "24", "--out", (dir / "ev2").string()});
    CHECK(long_h.code == kExitInvalid);
    CHECK(long_h.err.find("exceeds") != std::string::npos);

    const Run an = with({"analyze", "--checkpoint", ckpt, "--out", (dir / "an").string()});
    CHECK(an.code == kExitOk);
    for (const char* f : {"adaptive_edges.csv", "edge_asymmetry.csv", "adaptive_matrix.csv", "asymmetry_matrix.csv",
                          "wind_matrix.csv", "network.csv", "network_summary.txt"})
        CHECK(fs::exists(dir / "an" / f));

    write_file(dir / "wind.cfg", std::string(kSmallConfig) + "variant = ONLY_WIND\n");
    REQUIRE(cli({"train", "--config", (dir / "wind.cfg").string(), "--stations", stations, "--series", series,
                 "--out", (dir / "wind").string()})
                .code == kExitOk);
    const Run no_edges = cli({"analyze", "--checkpoint", (dir / "wind" / "seed_0" / "checkpoint.json").string(),
                              "--out", (dir / "an2").string()});
    CHECK(no_edges.code == kExitInvalid);
    CHECK(no_edges.err.find("variant has no adaptive edges") != std::string::npos);
}

TEST_CASE("ablate writes one row per variant and horizon plus the baseline") {
    fixtures::TempDir dir;
    write_file(dir / "c.cfg", std::string(kSmallConfig) + "variants = ONLY_WIND,STATIC\n");
    const std::string cfg = (dir / "c.cfg").string();
    REQUIRE(cli({"gen-synthetic", "--config", cfg, "--out", (dir / "data").string()}).code == kExitOk);
    const Run ab = cli({"ablate", "--config", cfg, "--stations", (dir / "data" / "stations.csv").string(), "--series",
                        (dir / "data" / "series.csv").string(), "--out", (dir / "ab").string()});
    REQUIRE(ab.code == kExitOk);
    std::ifstream in(dir / "ab" / "ablation.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "variant,horizon,mae_mean,mae_std,rmse_mean,rmse_std,best");
    std::size_t rows = 0, best = 0;
    while (std::getline(in, line)) {
        ++rows;
        if (line.back() == '1')
            ++best;
    }
    CHECK(rows == 2 * 3);
    CHECK(best == 2);
}
