#include "dgnaea/forecaster.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "dgnaea/csv.hpp"

namespace dgnaea {

using json = nlohmann::json;

std::string_view to_string(Variant v) {
    switch (v) {
    case Variant::AeaWind: return "AEA_WIND";
    case Variant::OnlyWind: return "ONLY_WIND";
    case Variant::OnlyAea: return "ONLY_AEA";
    case Variant::Static: return "STATIC";
    case Variant::WoWeather: return "WO_WEATHER";
    }
    return "?";
}

Variant parse_variant(std::string_view name) {
    std::string up(name);
    std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
    for (Variant v : kAllVariants)
        if (up == to_string(v))
            return v;
    throw std::invalid_argument("unknown variant '" + std::string(name) +
                                "' (expected AEA_WIND, ONLY_WIND, ONLY_AEA, STATIC or WO_WEATHER)");
}

bool uses_wind_graph(Variant v) {
    return v == Variant::AeaWind || v == Variant::OnlyWind || v == Variant::WoWeather;
}

bool uses_adaptive_edges(Variant v) {
    return v == Variant::AeaWind || v == Variant::OnlyAea || v == Variant::WoWeather;
}

bool uses_fusion(Variant v) {
    return uses_wind_graph(v) && uses_adaptive_edges(v);
}

namespace {

void add_linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
    store.add(prefix + ".weight", uniform_matrix(in, out, std::sqrt(1.0 / static_cast<double>(in)), rng));
    store.add(prefix + ".bias", Matrix(1, out));
}

spatial::Linear bind_linear(const BoundParams& p, const std::string& prefix) {
    return {p[prefix + ".weight"], p[prefix + ".bias"]};
}

spatial::MpnnWeights bind_mpnn(const BoundParams& p, const std::string& prefix) {
    return {bind_linear(p, prefix + ".phi"), bind_linear(p, prefix + ".omega")};
}

} // namespace

DgnAeaModel init_model(const ModelConfig& config, const StationTable& stations, const GraphTopology& topology) {
    if (config.edge_hidden == 0 || config.hidden == 0 || config.horizon == 0)
        throw std::invalid_argument("model widths and horizon must be positive");
    if (topology.n_nodes != stations.size())
        throw std::invalid_argument("topology does not match station table");

    DgnAeaModel m;
    m.config = config;
    m.stations = stations;
    m.topology = topology;

    const std::size_t he = config.edge_hidden, h = config.hidden;
    Rng rng(mix_seed(config.seed, seed_stream::kWeights));
    auto add_mpnn = [&](const std::string& name) {
        add_linear(m.params, name + ".phi", spatial::kMessageInput, he, rng);
        add_linear(m.params, name + ".omega", he, he, rng);
    };
    const Variant v = config.variant;
    if (v == Variant::Static)
        add_mpnn("mpnn_static");
    if (uses_wind_graph(v))
        add_mpnn("mpnn_wind");
    if (uses_adaptive_edges(v))
        add_mpnn("mpnn_aea");
    if (uses_fusion(v))
        add_linear(m.params, "fusion.psi", 2 * he, he, rng);
    const std::size_t gate_in = h + he + spatial::kEmbedWidth;
    add_linear(m.params, "gru.update", gate_in, h, rng);
    add_linear(m.params, "gru.reset", gate_in, h, rng);
    add_linear(m.params, "gru.candidate", gate_in, h, rng);
    add_linear(m.params, "head", h, 1, rng);
    if (uses_adaptive_edges(v)) {
        Rng edge_rng(mix_seed(config.seed, seed_stream::kAdaptiveEdges));
        m.params.add("adaptive_edges", uniform_matrix(topology.edge_count(), 1, 0.1, edge_rng));
    }
    return m;
}

// --- forward -----------------------------------------------------------------

BoundModel::BoundModel(ad::Tape& tape, const DgnAeaModel& model, std::size_t batch, bool trainable)
    : tape_(&tape),
      model_(&model),
      batch_(batch),
      params_(tape, model.params, trainable),
      graph_(spatial::GraphIndex::build(model.topology, batch)) {
    const std::size_t l = model.topology.edge_count();
    std::vector<std::size_t> tile(batch * l);
    for (std::size_t k = 0; k < tile.size(); ++k)
        tile[k] = k % l;
    edge_tile_ = ad::RowIndex::make(std::move(tile), l);
}

std::vector<ad::Value> BoundModel::forward(const ForecastBatch& in, std::vector<StepState>* states) const {
    const DgnAeaModel& m = *model_;
    const Variant variant = m.config.variant;
    const std::size_t bn = graph_.n_nodes, bl = graph_.n_edges;
    if (in.batch != batch_)
        throw std::invalid_argument("batch size differs from the bound model");
    if (in.x0.rows() != bn || in.x0.cols() != 1)
        throw std::invalid_argument("x0 must be (B*N) x 1");
    if (in.horizon() == 0)
        throw std::invalid_argument("forecast horizon must be positive");
    const bool need_wind = uses_wind_graph(variant);
    if (need_wind && in.wind.size() != in.horizon())
        throw std::invalid_argument("wind edge weights needed for every forecast step");
    for (std::size_t t = 0; t < in.horizon(); ++t) {
        if (in.features[t].rows() != bn || in.features[t].cols() != spatial::kWeatherFeatures)
            throw std::invalid_argument("features must be (B*N) x 8 per step");
        if (need_wind && (in.wind[t].rows() != bl || in.wind[t].cols() != 1))
            throw std::invalid_argument("wind edge weights must be (B*l) x 1 per step");
    }

    ad::Tape& tape = *tape_;
    const BoundParams& p = params_;
    const std::size_t h = m.config.hidden;

    spatial::MpnnWeights mpnn_wind, mpnn_aea, mpnn_static;
    if (need_wind)
        mpnn_wind = bind_mpnn(p, "mpnn_wind");
    if (uses_adaptive_edges(variant))
        mpnn_aea = bind_mpnn(p, "mpnn_aea");
    if (variant == Variant::Static)
        mpnn_static = bind_mpnn(p, "mpnn_static");
    spatial::FusionWeights fusion;
    if (uses_fusion(variant))
        fusion.psi = bind_linear(p, "fusion.psi");
    const temporal::GruWeights gru{bind_linear(p, "gru.update"), bind_linear(p, "gru.reset"),
                                   bind_linear(p, "gru.candidate")};
    const spatial::Linear head = bind_linear(p, "head");

    // Adaptive edge weights are one parameter per edge, shared by every step and window.
    ad::Value z_aea, z_static, no_weather;
    if (uses_adaptive_edges(variant))
        z_aea = ad::gather_rows(p["adaptive_edges"], edge_tile_);
    if (variant == Variant::Static)
        z_static = tape.constant(Matrix(bl, 1, 1.0));
    if (variant == Variant::WoWeather)
        no_weather = tape.constant(Matrix(bn, spatial::kWeatherFeatures));

    ad::Value x_prev = tape.constant(in.x0);
    ad::Value hidden = tape.constant(Matrix(bn, h));
    std::vector<ad::Value> outputs;
    outputs.reserve(in.horizon());
    for (std::size_t t = 0; t < in.horizon(); ++t) {
        StepState s;
        const ad::Value weather = variant == Variant::WoWeather ? no_weather : tape.constant(in.features[t]);
        s.embed = spatial::node_embed(x_prev, weather);
        if (variant == Variant::Static) {
            s.messages_wind = spatial::edge_messages(mpnn_static, s.embed, z_static, graph_);
            s.e_wind = spatial::aggregate_directed(mpnn_static, s.messages_wind, graph_);
            s.fused = spatial::fuse_single(s.e_wind);
        } else {
            if (need_wind) {
                s.messages_wind = spatial::edge_messages(mpnn_wind, s.embed, tape.constant(in.wind[t]), graph_);
                s.e_wind = spatial::aggregate_directed(mpnn_wind, s.messages_wind, graph_);
            }
            if (uses_adaptive_edges(variant)) {
                s.messages_aea = spatial::edge_messages(mpnn_aea, s.embed, z_aea, graph_);
                s.e_aea = spatial::aggregate_directed(mpnn_aea, s.messages_aea, graph_);
            }
            if (uses_fusion(variant))
                s.fused = spatial::fuse_graphs(fusion, s.e_wind, s.e_aea);
            else
                s.fused = spatial::fuse_single(need_wind ? s.e_wind : s.e_aea);
        }
        s.gru = temporal::gru_step(gru, s.fused, s.embed, hidden);
        hidden = s.gru.hidden;
        s.output = temporal::readout(head, hidden);
        x_prev = s.output;
        outputs.push_back(s.output);
        if (states)
            states->push_back(std::move(s));
    }
    return outputs;
}

std::vector<Matrix> forecast_normalized(const DgnAeaModel& model, const ForecastBatch& inputs) {
    ad::Tape tape;
    BoundModel bound(tape, model, inputs.batch, false);
    const auto outs = bound.forward(inputs);
    std::vector<Matrix> result;
    result.reserve(outs.size());
    for (const ad::Value& v : outs)
        result.push_back(v.data());
    return result;
}

ForecastResult forecast(const DgnAeaModel& model, const Matrix& x0, const std::vector<Matrix>& features,
                        const Matrix& wind, std::vector<TimePoint> timestamps) {
    const std::size_t n = model.topology.n_nodes, l = model.topology.edge_count();
    const std::size_t horizon = features.size();
    if (x0.rows() != n || x0.cols() != 1)
        throw std::invalid_argument("x0 must have one entry per station");
    if (!x0.all_finite())
        throw NumericalError("non-finite value in x0");
    ForecastBatch in;
    in.x0 = x0;
    in.features = features;
    for (const Matrix& f : features)
        if (!f.all_finite())
            throw NumericalError("non-finite value in weather features");
    if (uses_wind_graph(model.config.variant)) {
        if (wind.rows() != horizon || wind.cols() != l)
            throw std::invalid_argument("wind edge weights must be horizon x edges");
        if (!wind.all_finite())
            throw NumericalError("non-finite value in wind edge weights");
        for (std::size_t t = 0; t < horizon; ++t) {
            Matrix z(l, 1);
            for (std::size_t e = 0; e < l; ++e)
                z(e, 0) = wind(t, e);
            in.wind.push_back(std::move(z));
        }
    }
    const auto outs = forecast_normalized(model, in);
    ForecastResult r;
    r.values = Matrix(horizon, n);
    for (std::size_t t = 0; t < horizon; ++t)
        for (std::size_t i = 0; i < n; ++i)
            r.values(t, i) = model.norm.invert_pm25(outs[t](i, 0));
    if (!r.values.all_finite())
        throw NumericalError("forecast produced non-finite values");
    if (!timestamps.empty() && timestamps.size() != horizon)
        throw std::invalid_argument("timestamps must match the horizon");
    r.timestamps = std::move(timestamps);
    return r;
}

// --- adaptive edge export ------------------------------------------------------

std::vector<AdaptiveEdgeRow> export_adaptive_edges(const DgnAeaModel& model) {
    if (!model.has_adaptive_edges())
        throw std::invalid_argument("variant has no adaptive edges");
    const Matrix& z = model.params.get("adaptive_edges");
    std::vector<AdaptiveEdgeRow> rows;
    for (std::size_t e = 0; e < model.topology.edge_count(); ++e) {
        const Edge& ed = model.topology.edges[e];
        rows.push_back({model.stations[ed.src].id, model.stations[ed.dst].id, z(e, 0)});
    }
    return rows;
}

std::vector<EdgeAsymmetryRow> adaptive_edge_asymmetry(const DgnAeaModel& model) {
    if (!model.has_adaptive_edges())
        throw std::invalid_argument("variant has no adaptive edges");
    const Matrix& z = model.params.get("adaptive_edges");
    std::vector<EdgeAsymmetryRow> rows;
    for (std::size_t e = 0; e < model.topology.edge_count(); ++e) {
        const Edge& ed = model.topology.edges[e];
        if (ed.src >= ed.dst)
            continue;
        const std::size_t back = model.topology.find(ed.dst, ed.src);
        if (back == model.topology.edge_count())
            continue;
        rows.push_back({model.stations[ed.src].id, model.stations[ed.dst].id, z(e, 0), z(back, 0),
                        z(e, 0) - z(back, 0)});
    }
    return rows;
}

void write_adaptive_edges_csv(const std::filesystem::path& path, const std::vector<AdaptiveEdgeRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << "src_id,dst_id,z_a\n";
    for (const auto& r : rows)
        out << csv::quote(r.src_id) << ',' << csv::quote(r.dst_id) << ',' << csv::format_double(r.value) << '\n';
}

void write_edge_asymmetry_csv(const std::filesystem::path& path, const std::vector<EdgeAsymmetryRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << "a_id,b_id,z_ab,z_ba,difference\n";
    for (const auto& r : rows)
        out << csv::quote(r.a_id) << ',' << csv::quote(r.b_id) << ',' << csv::format_double(r.a_to_b) << ','
            << csv::format_double(r.b_to_a) << ',' << csv::format_double(r.difference) << '\n';
}

// --- checkpoint --------------------------------------------------------------

namespace {
constexpr const char* kCheckpointFormat = "dgnaea-checkpoint";
constexpr int kCheckpointVersion = 1;

template <typename T, std::size_t N>
std::array<T, N> to_array(const json& j) {
    std::array<T, N> a{};
    if (!j.is_array() || j.size() != N)
        throw std::invalid_argument("checkpoint: malformed array");
    for (std::size_t i = 0; i < N; ++i)
        a[i] = j[i].get<T>();
    return a;
}
} // namespace

void save_checkpoint(const std::filesystem::path& path, const DgnAeaModel& model) {
    json j;
    j["format"] = kCheckpointFormat;
    j["version"] = kCheckpointVersion;
    j["config"] = {{"variant", std::string(to_string(model.config.variant))},
                   {"edge_hidden", model.config.edge_hidden},
                   {"hidden", model.config.hidden},
                   {"horizon", model.config.horizon},
                   {"seed", model.config.seed}};
    json st = json::array();
    for (const Station& s : model.stations)
        st.push_back({{"id", s.id}, {"name", s.name}, {"lat", s.lat}, {"lon", s.lon}, {"altitude_km", s.altitude_km}});
    j["stations"] = std::move(st);
    json edges = json::array();
    for (const Edge& e : model.topology.edges)
        edges.push_back({e.src, e.dst});
    j["topology"] = {{"n_nodes", model.topology.n_nodes}, {"edges", std::move(edges)}};
    const NormStats& n = model.norm;
    j["norm"] = {{"pm25_mean", n.pm25_mean},       {"pm25_std", n.pm25_std},
                 {"pm25_constant", n.pm25_constant}, {"feature_mean", n.feature_mean},
                 {"feature_std", n.feature_std},   {"feature_constant", n.feature_constant},
                 {"wind_scale", n.wind_scale}};
    json params = json::array();
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        const Matrix& m = model.params.at(i);
        if (!m.all_finite())
            throw NumericalError("parameter " + model.params.name(i) + " is not finite");
        params.push_back(
            {{"name", model.params.name(i)}, {"rows", m.rows()}, {"cols", m.cols()}, {"data", m.values()}});
    }
    j["params"] = std::move(params);

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << j.dump(1) << '\n';
}

DgnAeaModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::invalid_argument("cannot open checkpoint " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw std::invalid_argument("checkpoint " + path.string() + ": " + e.what());
    }
    try {
        if (j.at("format") != kCheckpointFormat || j.at("version") != kCheckpointVersion)
            throw std::invalid_argument("unsupported checkpoint format");
        DgnAeaModel m;
        const json& c = j.at("config");
        m.config.variant = parse_variant(c.at("variant").get<std::string>());
        m.config.edge_hidden = c.at("edge_hidden").get<std::size_t>();
        m.config.hidden = c.at("hidden").get<std::size_t>();
        m.config.horizon = c.at("horizon").get<std::size_t>();
        m.config.seed = c.at("seed").get<std::uint64_t>();
        for (const json& s : j.at("stations"))
            m.stations.push_back(Station{s.at("id").get<std::string>(), s.at("name").get<std::string>(),
                                         s.at("lat").get<double>(), s.at("lon").get<double>(),
                                         s.at("altitude_km").get<double>()});
        m.topology.n_nodes = j.at("topology").at("n_nodes").get<std::size_t>();
        for (const json& e : j.at("topology").at("edges")) {
            const Edge ed{e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()};
            if (ed.src >= m.topology.n_nodes || ed.dst >= m.topology.n_nodes)
                throw std::invalid_argument("edge endpoint out of range");
            m.topology.edges.push_back(ed);
        }
        const json& n = j.at("norm");
        m.norm.pm25_mean = n.at("pm25_mean").get<double>();
        m.norm.pm25_std = n.at("pm25_std").get<double>();
        m.norm.pm25_constant = n.at("pm25_constant").get<bool>();
        m.norm.feature_mean = to_array<double, kNumFeatures>(n.at("feature_mean"));
        m.norm.feature_std = to_array<double, kNumFeatures>(n.at("feature_std"));
        m.norm.feature_constant = to_array<bool, kNumFeatures>(n.at("feature_constant"));
        m.norm.wind_scale = n.at("wind_scale").get<double>();
        for (const json& p : j.at("params")) {
            const auto rows = p.at("rows").get<std::size_t>();
            const auto cols = p.at("cols").get<std::size_t>();
            m.params.add(p.at("name").get<std::string>(), Matrix(rows, cols, p.at("data").get<std::vector<double>>()));
        }
        // Shapes must agree with a fresh model of the same configuration.
        const DgnAeaModel ref = init_model(m.config, m.stations, m.topology);
        if (ref.params.size() != m.params.size())
            throw std::invalid_argument("parameter set does not match the configured variant");
        for (std::size_t i = 0; i < ref.params.size(); ++i)
            if (ref.params.name(i) != m.params.name(i) || !ref.params.at(i).same_shape(m.params.at(i)))
                throw std::invalid_argument("parameter '" + m.params.name(i) + "' has an unexpected shape");
        return m;
    } catch (const json::exception& e) {
        throw std::invalid_argument("checkpoint " + path.string() + ": " + e.what());
    }
}

} // namespace dgnaea
