#include "dgnaea/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgnaea/baselines.hpp"
#include "dgnaea/csv.hpp"
#include "dgnaea/data.hpp"
#include "dgnaea/forecaster.hpp"
#include "dgnaea/geo_graph.hpp"
#include "dgnaea/netanalysis.hpp"
#include "dgnaea/run_config.hpp"
#include "dgnaea/training.hpp"

namespace dgnaea {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    bool force = false;
    std::string stations;
    std::string series;
    std::string checkpoint;
};

RunConfig resolve_config(const CommonOptions& o) {
    RunConfig c = o.config.empty() ? RunConfig() : RunConfig::load(o.config);
    if (!o.stations.empty())
        c.set("stations", o.stations);
    if (!o.series.empty())
        c.set("series", o.series);
    if (!o.checkpoint.empty())
        c.set("checkpoint", o.checkpoint);
    if (o.seed)
        c.set("seeds", std::to_string(*o.seed));
    return c;
}

const std::string& require_key(const RunConfig& c, std::string_view key) {
    const std::string& v = c.get(key);
    if (v.empty())
        throw std::invalid_argument("missing " + std::string(key) + " (set it in the config or pass --" +
                                    std::string(key) + ")");
    return v;
}

/// Creates `dir`. Guarded commands refuse to reuse a non-empty directory.
fs::path prepare_out_dir(const CommonOptions& o, bool guarded) {
    if (o.out.empty())
        throw std::invalid_argument("--out is required");
    const fs::path dir(o.out);
    if (guarded && fs::exists(dir) && !fs::is_empty(dir) && !o.force)
        throw std::invalid_argument("output directory " + dir.string() + " already exists (use --force to overwrite)");
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string graph_summary(const StationTable& stations, const GraphTopology& topo) {
    std::vector<std::size_t> out_degree(topo.n_nodes, 0);
    for (const Edge& e : topo.edges)
        ++out_degree[e.src];
    std::map<std::size_t, std::size_t> histogram;
    for (std::size_t d : out_degree)
        ++histogram[d];
    std::string s = "nodes = " + std::to_string(stations.size()) + "\n";
    s += "edges = " + std::to_string(topo.edge_count()) + "\n";
    for (const auto& [degree, count] : histogram)
        s += "degree_" + std::to_string(degree) + " = " + std::to_string(count) + "\n";
    return s;
}

// --- build-graph ---------------------------------------------------------------

int cmd_build_graph(const CommonOptions& o, std::ostream& out) {
    const RunConfig cfg = resolve_config(o);
    const StationTable stations = read_stations_csv(require_key(cfg, "stations"));
    const auto coords = project_stations(stations);
    const GraphTopology topo = build_topology(stations, coords, cfg.thresholds());
    const fs::path dir = prepare_out_dir(o, false);
    write_topology_csv(dir / "topology.csv", topo, stations, coords);
    const std::string summary = graph_summary(stations, topo);
    write_text(dir / "graph_summary.txt", summary);
    cfg.write_resolved(dir / "run_config.txt");
    out << summary;
    return kExitOk;
}

// --- gen-synthetic -------------------------------------------------------------

int cmd_gen_synthetic(const CommonOptions& o, bool conservation, std::ostream& out) {
    RunConfig cfg = resolve_config(o);
    if (conservation)
        cfg.set("conservation", "true");
    const std::uint64_t seed = cfg.get_u64_list("seeds").front();
    const SynthConfig sc = cfg.synth_config(seed);
    const StationTable stations =
        cfg.get("stations").empty() ? synth_stations(sc.n_stations, seed) : read_stations_csv(cfg.get("stations"));
    const auto coords = project_stations(stations);
    const GraphTopology topo = build_topology(stations, coords, cfg.thresholds());
    const SynthResult res = synth_advection(stations, topo, coords, sc);

    const fs::path dir = prepare_out_dir(o, false);
    write_stations_csv(dir / "stations.csv", stations);
    write_series_csv(dir / "series.csv", res.dataset);
    write_topology_csv(dir / "topology.csv", topo, stations, coords);
    write_planted_edges_csv(dir / "planted_edges.csv", res);
    std::string summary = graph_summary(stations, topo);
    summary += "steps = " + std::to_string(res.dataset.steps()) + "\n";
    summary += "max_weight_sum = " + csv::format_double(res.max_weight_sum) + "\n";
    summary += "mass_drift = " + csv::format_double(res.mass_drift) + "\n";
    write_text(dir / "synthetic_summary.txt", summary);
    cfg.write_resolved(dir / "run_config.txt");
    out << summary;
    return kExitOk;
}

// --- train / ablate ------------------------------------------------------------

struct LoadedData {
    Dataset dataset;
    GraphTopology topology;
    SplitData splits;
};

LoadedData load_inputs(const RunConfig& cfg) {
    LoadedData d;
    d.dataset = load_dataset(require_key(cfg, "stations"), require_key(cfg, "series"));
    d.topology = build_topology(d.dataset.stations, cfg.thresholds());
    d.splits = cfg.split_dataset(d.dataset);
    return d;
}

struct SeedRun {
    std::uint64_t seed = 0;
    MetricsReport metrics;
};

SeedRun train_one(const RunConfig& cfg, Variant variant, std::uint64_t seed, const LoadedData& data,
                  const fs::path& dir, std::ostream& err) {
    ModelConfig mc = cfg.model_config(seed);
    mc.variant = variant;
    DgnAeaModel model = init_model(mc, data.dataset.stations, data.topology);
    model.norm = fit_model_normalizer(data.splits.train, data.topology);
    const PreparedSplit train_split = prepare_split(model, data.splits.train);
    const PreparedSplit val_split = prepare_split(model, data.splits.val);
    const PreparedSplit test_split = prepare_split(model, data.splits.test);
    const TrainResult r = train(model, train_split, val_split, cfg.train_config(seed), [&](const EpochRecord& e) {
        err << to_string(variant) << " seed " << seed << " epoch " << e.epoch << " train_mse "
            << csv::format_double(e.train_mse) << " val_mse " << csv::format_double(e.val_mse) << '\n';
    });
    const auto horizons = cfg.get_size_list("eval_horizons");
    SeedRun run{seed, evaluate(r.model, test_split, horizons)};
    fs::create_directories(dir);
    save_checkpoint(dir / "checkpoint.json", r.model);
    write_history_csv(dir / "history.csv", r.history);
    write_metrics_csv(dir / "metrics.csv", run.metrics);
    return run;
}

struct Summary {
    std::size_t horizon = 0;
    double mae_mean = 0.0, mae_std = 0.0, rmse_mean = 0.0, rmse_std = 0.0;
};

/// Mean and sample standard deviation across seeds (std 0 for one run).
std::vector<Summary> summarize(const std::vector<SeedRun>& runs) {
    std::vector<Summary> out;
    for (std::size_t k = 0; k < runs.front().metrics.rows.size(); ++k) {
        Summary s;
        s.horizon = runs.front().metrics.rows[k].horizon;
        const double n = static_cast<double>(runs.size());
        for (const auto& r : runs) {
            s.mae_mean += r.metrics.rows[k].mae / n;
            s.rmse_mean += r.metrics.rows[k].rmse / n;
        }
        if (runs.size() > 1) {
            double vm = 0.0, vr = 0.0;
            for (const auto& r : runs) {
                vm += std::pow(r.metrics.rows[k].mae - s.mae_mean, 2);
                vr += std::pow(r.metrics.rows[k].rmse - s.rmse_mean, 2);
            }
            s.mae_std = std::sqrt(vm / (n - 1.0));
            s.rmse_std = std::sqrt(vr / (n - 1.0));
        }
        out.push_back(s);
    }
    return out;
}

void write_summary_csv(const fs::path& path, const std::vector<Summary>& rows, std::size_t runs) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << "horizon,mae_mean,mae_std,rmse_mean,rmse_std,runs\n";
    for (const auto& s : rows)
        out << s.horizon << ',' << csv::format_double(s.mae_mean) << ',' << csv::format_double(s.mae_std) << ','
            << csv::format_double(s.rmse_mean) << ',' << csv::format_double(s.rmse_std) << ',' << runs << '\n';
}

std::string seed_dir(std::uint64_t seed) {
    return "seed_" + std::to_string(seed);
}

int cmd_train(const CommonOptions& o, std::ostream& out, std::ostream& err) {
    const RunConfig cfg = resolve_config(o);
    const LoadedData data = load_inputs(cfg);
    const Variant variant = parse_variant(cfg.get("variant"));
    const fs::path dir = prepare_out_dir(o, true);
    cfg.write_resolved(dir / "run_config.txt");
    std::vector<SeedRun> runs;
    for (std::uint64_t seed : cfg.get_u64_list("seeds")) {
        const fs::path sd = dir / seed_dir(seed);
        runs.push_back(train_one(cfg, variant, seed, data, sd, err));
        cfg.write_resolved(sd / "run_config.txt");
    }
    const auto summary = summarize(runs);
    write_summary_csv(dir / "metrics_summary.csv", summary, runs.size());
    write_metrics_csv(dir / "ha_metrics.csv", evaluate_ha(fit_ha(data.splits.train), data.splits.test,
                                                          cfg.get_size_list("eval_horizons")));
    for (const auto& s : summary)
        out << "horizon " << s.horizon << " mae " << csv::format_double(s.mae_mean) << " +- "
            << csv::format_double(s.mae_std) << " rmse " << csv::format_double(s.rmse_mean) << " +- "
            << csv::format_double(s.rmse_std) << '\n';
    return kExitOk;
}

int cmd_ablate(const CommonOptions& o, std::ostream& out, std::ostream& err) {
    const RunConfig cfg = resolve_config(o);
    const LoadedData data = load_inputs(cfg);
    const fs::path dir = prepare_out_dir(o, true);
    cfg.write_resolved(dir / "run_config.txt");
    const auto seeds = cfg.get_u64_list("seeds");
    const auto horizons = cfg.get_size_list("eval_horizons");

    struct Row {
        std::string name;
        std::vector<Summary> summary;
    };
    std::vector<Row> rows;
    for (Variant v : cfg.variants()) {
        const fs::path vd = dir / std::string(to_string(v));
        std::vector<SeedRun> runs;
        for (std::uint64_t seed : seeds)
            runs.push_back(train_one(cfg, v, seed, data, vd / seed_dir(seed), err));
        rows.push_back({std::string(to_string(v)), summarize(runs)});
    }
    const MetricsReport ha = evaluate_ha(fit_ha(data.splits.train), data.splits.test, horizons);

    std::ofstream csv_out(dir / "ablation.csv", std::ios::binary);
    if (!csv_out)
        throw std::runtime_error("cannot write ablation table");
    csv_out << "variant,horizon,mae_mean,mae_std,rmse_mean,rmse_std,best\n";
    for (std::size_t k = 0; k < horizons.size(); ++k) {
        std::size_t best = 0;
        for (std::size_t r = 1; r < rows.size(); ++r)
            if (rows[r].summary[k].rmse_mean < rows[best].summary[k].rmse_mean)
                best = r;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const Summary& s = rows[r].summary[k];
            csv_out << rows[r].name << ',' << s.horizon << ',' << csv::format_double(s.mae_mean) << ','
                    << csv::format_double(s.mae_std) << ',' << csv::format_double(s.rmse_mean) << ','
                    << csv::format_double(s.rmse_std) << ',' << (r == best ? 1 : 0) << '\n';
            out << rows[r].name << " horizon " << s.horizon << " rmse " << csv::format_double(s.rmse_mean)
                << (r == best ? " *" : "") << '\n';
        }
        csv_out << "HA," << ha.rows[k].horizon << ',' << csv::format_double(ha.rows[k].mae) << ",0,"
                << csv::format_double(ha.rows[k].rmse) << ",0,0\n";
    }
    return kExitOk;
}

// --- evaluate ------------------------------------------------------------------

int cmd_evaluate(const CommonOptions& o, const std::string& horizons_flag, std::ostream& out) {
    RunConfig cfg = resolve_config(o);
    if (!horizons_flag.empty())
        cfg.set("eval_horizons", horizons_flag);
    const DgnAeaModel model = load_checkpoint(require_key(cfg, "checkpoint"));
    const Dataset ds = load_dataset(require_key(cfg, "stations"), require_key(cfg, "series"));
    const SplitData parts = cfg.split_dataset(ds);
    const MetricsReport m = evaluate(model, prepare_split(model, parts.test), cfg.get_size_list("eval_horizons"));
    const fs::path dir = prepare_out_dir(o, false);
    write_metrics_csv(dir / "metrics.csv", m);
    cfg.write_resolved(dir / "run_config.txt");
    for (const auto& r : m.rows)
        out << "horizon " << r.horizon << " mae " << csv::format_double(r.mae) << " rmse "
            << csv::format_double(r.rmse) << '\n';
    return kExitOk;
}

// --- analyze -------------------------------------------------------------------

void write_edge_matrix(const fs::path& path, const StationTable& stations, const GraphTopology& topo,
                       std::span<const double> weights) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << "src_id";
    for (const Station& s : stations)
        out << ',' << csv::quote(s.id);
    out << '\n';
    for (std::size_t i = 0; i < stations.size(); ++i) {
        out << csv::quote(stations[i].id);
        for (std::size_t j = 0; j < stations.size(); ++j) {
            const std::size_t e = topo.find(i, j);
            out << ',' << (e == topo.edge_count() ? std::string() : csv::format_double(weights[e]));
        }
        out << '\n';
    }
}

int cmd_analyze(const CommonOptions& o, const std::string& at_time, std::ostream& out) {
    const RunConfig cfg = resolve_config(o);
    const DgnAeaModel model = load_checkpoint(require_key(cfg, "checkpoint"));
    const auto edges = export_adaptive_edges(model);
    const Matrix& z = model.params.get("adaptive_edges");
    const fs::path dir = prepare_out_dir(o, false);
    write_adaptive_edges_csv(dir / "adaptive_edges.csv", edges);
    write_edge_asymmetry_csv(dir / "edge_asymmetry.csv", adaptive_edge_asymmetry(model));
    write_edge_matrix(dir / "adaptive_matrix.csv", model.stations, model.topology, z.values());
    std::vector<double> diff(model.topology.edge_count());
    for (std::size_t e = 0; e < diff.size(); ++e) {
        const Edge& ed = model.topology.edges[e];
        const std::size_t back = model.topology.find(ed.dst, ed.src);
        diff[e] = back == model.topology.edge_count() ? z(e, 0) : z(e, 0) - z(back, 0);
    }
    write_edge_matrix(dir / "asymmetry_matrix.csv", model.stations, model.topology, diff);

    if (!cfg.get("series").empty()) {
        const Dataset ds = load_dataset(require_key(cfg, "stations"), cfg.get("series"));
        DgnAeaModel wind_view = model;
        wind_view.config.variant = Variant::OnlyWind;
        const PreparedSplit p = prepare_split(wind_view, ds);
        std::vector<double> w(model.topology.edge_count(), 0.0);
        if (at_time.empty()) {
            for (std::size_t t = 0; t < p.steps(); ++t)
                for (std::size_t e = 0; e < w.size(); ++e)
                    w[e] += p.wind(t, e) / static_cast<double>(p.steps());
        } else {
            const TimePoint when = parse_timestamp(at_time);
            const auto it = std::find(p.timestamps.begin(), p.timestamps.end(), when);
            if (it == p.timestamps.end())
                throw std::invalid_argument("timestamp " + at_time + " not in the series");
            const auto t = static_cast<std::size_t>(it - p.timestamps.begin());
            for (std::size_t e = 0; e < w.size(); ++e)
                w[e] = p.wind(t, e);
        }
        write_edge_matrix(dir / "wind_matrix.csv", model.stations, model.topology, w);
    }

    const auto weighted = compose_adjacency(model.topology, z.values());
    const auto stats = strength_ranking(weighted, model.stations);
    const auto report = weight_degree_report(stats);
    write_network_csv(dir / "network.csv", stats);
    write_network_summary(dir / "network_summary.txt", stats, report);
    cfg.write_resolved(dir / "run_config.txt");
    std::ifstream summary(dir / "network_summary.txt");
    out << summary.rdbuf();
    return kExitOk;
}

void add_common(CLI::App* cmd, CommonOptions& o, bool with_data) {
    cmd->add_option("--config", o.config, "key = value run configuration");
    cmd->add_option("--out", o.out, "output directory")->required();
    cmd->add_option("--seed", o.seed, "single seed, overrides the config seed list");
    cmd->add_flag("--force", o.force, "overwrite an existing output directory");
    cmd->add_option("--stations", o.stations, "stations CSV");
    if (with_data)
        cmd->add_option("--series", o.series, "series CSV");
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Directed graph PM2.5 forecaster with adaptive edges"};
    app.require_subcommand(1);
    CommonOptions o;
    bool conservation = false;
    std::string horizons, at_time;

    auto* build = app.add_subcommand("build-graph", "build the station topology");
    add_common(build, o, false);
    auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic advection dataset");
    add_common(gen, o, false);
    gen->add_flag("--conservation", conservation, "closed system: no decay, sources or noise");
    auto* tr = app.add_subcommand("train", "train one variant for each configured seed");
    add_common(tr, o, true);
    auto* ev = app.add_subcommand("evaluate", "score a checkpoint on the test split");
    add_common(ev, o, true);
    ev->add_option("--checkpoint", o.checkpoint, "model checkpoint");
    ev->add_option("--horizons", horizons, "comma-separated lead times");
    auto* ab = app.add_subcommand("ablate", "train and compare every variant");
    add_common(ab, o, true);
    auto* an = app.add_subcommand("analyze", "export learned edges and network statistics");
    add_common(an, o, true);
    an->add_option("--checkpoint", o.checkpoint, "model checkpoint");
    an->add_option("--time", at_time, "timestamp for the wind edge matrix (default: series mean)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    try {
        if (*build)
            return cmd_build_graph(o, out);
        if (*gen)
            return cmd_gen_synthetic(o, conservation, out);
        if (*tr)
            return cmd_train(o, out, err);
        if (*ev)
            return cmd_evaluate(o, horizons, out);
        if (*ab)
            return cmd_ablate(o, out, err);
        if (*an)
            return cmd_analyze(o, at_time, out);
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::logic_error& e) {  // invalid_argument, out_of_range, domain_error
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const std::runtime_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    }
    return kExitInvalid;
}

} // namespace dgnaea
