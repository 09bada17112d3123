#include "dgnaea/run_config.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dgnaea/csv.hpp"

namespace dgnaea {

namespace {

constexpr std::array kKeys = {
    // inputs
    ConfigKey{"stations", "", "stations CSV (station_id,name,lat,lon,altitude_km)"},
    ConfigKey{"series", "", "long-format series CSV"},
    ConfigKey{"checkpoint", "", "model checkpoint for evaluate/analyze"},
    // graph
    ConfigKey{"max_distance_km", "300", "edge distance threshold (inclusive)"},
    ConfigKey{"max_altitude_diff_km", "1.2", "edge altitude-difference threshold (inclusive)"},
    // model
    ConfigKey{"variant", "AEA_WIND", "AEA_WIND, ONLY_WIND, ONLY_AEA, STATIC or WO_WEATHER"},
    ConfigKey{"variants", "AEA_WIND,ONLY_WIND,ONLY_AEA,STATIC,WO_WEATHER", "variants compared by ablate"},
    ConfigKey{"horizon", "6", "training horizon in 3-hour steps"},
    ConfigKey{"edge_hidden", "32", "message width"},
    ConfigKey{"hidden", "32", "GRU hidden width"},
    // training
    ConfigKey{"batch_size", "32", "windows per mini-batch"},
    ConfigKey{"max_epochs", "50", "epoch limit"},
    ConfigKey{"patience", "10", "epochs without validation improvement before stopping"},
    ConfigKey{"lr", "5e-4", "RMSProp learning rate"},
    ConfigKey{"weight_decay", "5e-4", "decoupled weight decay"},
    ConfigKey{"rmsprop_rho", "0.9", "squared-gradient averaging factor"},
    ConfigKey{"rmsprop_eps", "1e-8", "RMSProp denominator offset"},
    ConfigKey{"seeds", "0", "run seeds: comma list or a..b range"},
    // splits and evaluation
    ConfigKey{"split", "ratio", "dataset1, dataset2, dataset3, ratio, custom or none"},
    ConfigKey{"train_fraction", "0.6", "ratio split: leading training fraction"},
    ConfigKey{"val_fraction", "0.2", "ratio split: validation fraction"},
    ConfigKey{"train_begin", "", "custom split bounds, ISO timestamps, end exclusive"},
    ConfigKey{"train_end", "", ""},
    ConfigKey{"val_begin", "", ""},
    ConfigKey{"val_end", "", ""},
    ConfigKey{"test_begin", "", ""},
    ConfigKey{"test_end", "", ""},
    ConfigKey{"eval_horizons", "3,6,12,24", "lead times scored by evaluate"},
    // synthetic generator
    ConfigKey{"n_stations", "16", "synthetic station count"},
    ConfigKey{"n_steps", "2000", "synthetic series length after burn-in"},
    ConfigKey{"burn_in", "200", "discarded spin-up steps"},
    ConfigKey{"start", "2015-01-01T00:00:00", "first synthetic timestamp"},
    ConfigKey{"wind_regime", "rotating", "rotating, steady or calm"},
    ConfigKey{"transport", "wind", "wind (coefficient x advection) or static (coefficient only)"},
    ConfigKey{"mean_wind_speed", "4", "m/s"},
    ConfigKey{"coeff_scale", "4", "planted coefficient magnitude"},
    ConfigKey{"zero_fraction", "0.3", "share of edges with a zero planted coefficient"},
    ConfigKey{"base_source", "1", "mean per-step emission"},
    ConfigKey{"dominant_source", "", "station index whose emission is multiplied by dominant_factor"},
    ConfigKey{"dominant_factor", "4", ""},
    ConfigKey{"decay", "0.05", "per-step removal fraction"},
    ConfigKey{"noise_std", "0.3", "additive noise per step"},
    ConfigKey{"dt", "1", "transport time step"},
    ConfigKey{"conservation", "false", "zero decay, sources and noise; reports mass drift"},
};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

const ConfigKey* find_key(std::string_view name) {
    for (const ConfigKey& k : kKeys)
        if (k.name == name)
            return &k;
    return nullptr;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (auto t = trim(item); !t.empty())
            out.push_back(t);
    return out;
}

} // namespace

std::span<const ConfigKey> config_keys() {
    return kKeys;
}

RunConfig::RunConfig() {
    for (const ConfigKey& k : kKeys)
        values_.emplace(std::string(k.name), std::string(k.default_value));
}

RunConfig RunConfig::parse(std::string_view text, std::string_view origin) {
    RunConfig c;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    if (text.substr(0, 3) == "\xEF\xBB\xBF")
        pos = 3;
    while (pos <= text.size()) {
        const std::size_t nl = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        const std::string body = trim(line);
        if (body.empty())
            continue;
        const auto eq = body.find('=');
        const std::string where = std::string(origin) + ":" + std::to_string(line_no);
        if (eq == std::string::npos)
            throw std::invalid_argument(where + ": expected 'key = value'");
        const std::string key = trim(std::string_view(body).substr(0, eq));
        if (!find_key(key))
            throw std::invalid_argument(where + ": unknown key '" + key + "'");
        if (c.explicit_.contains(key))
            throw std::invalid_argument(where + ": key '" + key + "' given twice");
        c.set(key, trim(std::string_view(body).substr(eq + 1)));
    }
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::invalid_argument("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

void RunConfig::set(std::string_view key, std::string value) {
    if (!find_key(key))
        throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
    values_[std::string(key)] = std::move(value);
    explicit_[std::string(key)] = true;
}

const std::string& RunConfig::get(std::string_view key) const {
    const auto it = values_.find(key);
    if (it == values_.end())
        throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
    return it->second;
}

bool RunConfig::is_default(std::string_view key) const {
    return !explicit_.contains(key);
}

double RunConfig::get_double(std::string_view key) const {
    return csv::parse_double(get(key), "config key " + std::string(key));
}

std::size_t RunConfig::get_size(std::string_view key) const {
    const long long v = csv::parse_int(get(key), "config key " + std::string(key));
    if (v < 0)
        throw std::invalid_argument("config key " + std::string(key) + " must be nonnegative");
    return static_cast<std::size_t>(v);
}

std::uint64_t RunConfig::get_u64(std::string_view key) const {
    return get_size(key);
}

bool RunConfig::get_bool(std::string_view key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1" || v == "yes")
        return true;
    if (v == "false" || v == "0" || v == "no")
        return false;
    throw std::invalid_argument("config key " + std::string(key) + ": expected true or false, got '" + v + "'");
}

std::vector<std::uint64_t> RunConfig::get_u64_list(std::string_view key) const {
    const std::string what = "config key " + std::string(key);
    std::vector<std::uint64_t> out;
    for (const std::string& item : split_list(get(key))) {
        if (const auto dots = item.find(".."); dots != std::string::npos) {
            const long long a = csv::parse_int(trim(item.substr(0, dots)), what);
            const long long b = csv::parse_int(trim(item.substr(dots + 2)), what);
            if (a < 0 || b < a)
                throw std::invalid_argument(what + ": bad range '" + item + "'");
            for (long long v = a; v <= b; ++v)
                out.push_back(static_cast<std::uint64_t>(v));
        } else {
            const long long v = csv::parse_int(item, what);
            if (v < 0)
                throw std::invalid_argument(what + ": negative value");
            out.push_back(static_cast<std::uint64_t>(v));
        }
    }
    if (out.empty())
        throw std::invalid_argument(what + " is empty");
    return out;
}

std::vector<std::size_t> RunConfig::get_size_list(std::string_view key) const {
    const auto v = get_u64_list(key);
    return {v.begin(), v.end()};
}

std::string RunConfig::resolved() const {
    std::string out;
    for (const ConfigKey& k : kKeys)
        out += std::string(k.name) + " = " + get(k.name) + "\n";
    return out;
}

void RunConfig::write_resolved(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << resolved();
}

ModelConfig RunConfig::model_config(std::uint64_t seed) const {
    ModelConfig m;
    m.variant = parse_variant(get("variant"));
    m.horizon = get_size("horizon");
    m.edge_hidden = get_size("edge_hidden");
    m.hidden = get_size("hidden");
    m.seed = seed;
    return m;
}

TrainConfig RunConfig::train_config(std::uint64_t seed) const {
    TrainConfig t;
    t.batch_size = get_size("batch_size");
    t.max_epochs = get_size("max_epochs");
    t.patience = get_size("patience");
    t.lr = get_double("lr");
    t.weight_decay = get_double("weight_decay");
    t.rho = get_double("rmsprop_rho");
    t.eps = get_double("rmsprop_eps");
    t.seed = seed;
    t.validate();
    return t;
}

TopologyThresholds RunConfig::thresholds() const {
    return {get_double("max_distance_km"), get_double("max_altitude_diff_km")};
}

SynthConfig RunConfig::synth_config(std::uint64_t seed) const {
    SynthConfig s;
    s.n_stations = get_size("n_stations");
    s.n_steps = get_size("n_steps");
    s.burn_in = get_size("burn_in");
    s.start = parse_timestamp(get("start"));
    s.wind_regime = parse_wind_regime(get("wind_regime"));
    s.transport = parse_transport_mode(get("transport"));
    s.mean_wind_speed = get_double("mean_wind_speed");
    s.coeff_scale = get_double("coeff_scale");
    s.zero_fraction = get_double("zero_fraction");
    s.base_source = get_double("base_source");
    if (!get("dominant_source").empty())
        s.dominant_source = get_size("dominant_source");
    s.dominant_factor = get_double("dominant_factor");
    s.decay = get_double("decay");
    s.noise_std = get_double("noise_std");
    s.dt = get_double("dt");
    s.seed = seed;
    if (get_bool("conservation")) {
        s.decay = 0.0;
        s.noise_std = 0.0;
        s.source_rates.assign(s.n_stations, 0.0);
    }
    return s;
}

std::vector<Variant> RunConfig::variants() const {
    std::vector<Variant> out;
    for (const std::string& name : split_list(get("variants")))
        out.push_back(parse_variant(name));
    if (out.empty())
        throw std::invalid_argument("config key variants is empty");
    return out;
}

SplitData RunConfig::split_dataset(const Dataset& dataset) const {
    const std::string& name = get("split");
    if (name == "none")
        return {dataset, dataset, dataset};
    if (name == "ratio")
        return split(dataset, ratio_split(dataset, get_double("train_fraction"), get_double("val_fraction")));
    if (name == "custom") {
        auto ts = [&](std::string_view key) {
            if (get(key).empty())
                throw std::invalid_argument("custom split needs " + std::string(key));
            return parse_timestamp(get(key));
        };
        const SplitSpec ranges{{ts("train_begin"), ts("train_end")},
                             {ts("val_begin"), ts("val_end")},
                             {ts("test_begin"), ts("test_end")}};
        return split(dataset, ranges);
    }
    return split(dataset, SplitSpec::named(parse_split_scheme(name)));
}

} // namespace dgnaea
