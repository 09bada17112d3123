#include "dgnaea/data.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include "dgnaea/csv.hpp"
#include "dgnaea/params.hpp"

namespace dgnaea {

// --- time --------------------------------------------------------------------

TimePoint make_time(int year, unsigned month, unsigned day, unsigned hour) {
    using namespace std::chrono;
    const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
    if (!ymd.ok())
        throw std::invalid_argument("invalid calendar date");
    return static_cast<TimePoint>(sys_days{ymd}.time_since_epoch().count()) * 86400 + hour * 3600;
}

TimePoint parse_timestamp(std::string_view text) {
    std::string s(text);
    while (!s.empty() && (s.back() == 'Z' || s.back() == ' ' || s.back() == '\r'))
        s.pop_back();
    int y = 0;
    unsigned mo = 0, d = 0, h = 0, mi = 0, se = 0;
    char sep = 0;
    int consumed = 0;
    const int n = std::sscanf(s.c_str(), "%4d-%2u-%2u%c%2u:%2u:%2u%n", &y, &mo, &d, &sep, &h, &mi, &se, &consumed);
    if (n != 7 || (sep != 'T' && sep != ' ') || static_cast<std::size_t>(consumed) != s.size() || h > 23 ||
        mi > 59 || se > 59)
        throw std::invalid_argument("bad timestamp '" + std::string(text) + "' (expected YYYY-MM-DDTHH:MM:SS)");
    try {
        return make_time(y, mo, d) + h * 3600 + mi * 60 + se;
    } catch (const std::invalid_argument&) {
        throw std::invalid_argument("bad timestamp '" + std::string(text) + "'");
    }
}

std::string format_timestamp(TimePoint t) {
    using namespace std::chrono;
    const auto day_count = static_cast<int>(t >= 0 ? t / 86400 : (t - 86399) / 86400);
    const TimePoint secs = t - static_cast<TimePoint>(day_count) * 86400;
    const year_month_day ymd{sys_days{days{day_count}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(secs / 3600),
                  static_cast<int>(secs / 60 % 60), static_cast<int>(secs % 60));
    return buf;
}

// --- dataset -----------------------------------------------------------------

Matrix Dataset::features_at(std::size_t t) const {
    const std::size_t n = nodes();
    Matrix out(n, kNumFeatures);
    std::copy_n(features.data() + t * n * kNumFeatures, n * kNumFeatures, out.data());
    return out;
}

Matrix Dataset::feature_series(std::size_t k) const {
    Matrix out(steps(), nodes());
    for (std::size_t t = 0; t < steps(); ++t)
        for (std::size_t i = 0; i < nodes(); ++i)
            out(t, i) = feature(t, i, k);
    return out;
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > steps())
        throw std::out_of_range("dataset slice out of range");
    Dataset out;
    out.stations = stations;
    out.timestamps.assign(timestamps.begin() + begin, timestamps.begin() + end);
    const std::size_t n = nodes();
    out.pm25 = Matrix(end - begin, n);
    std::copy_n(pm25.data() + begin * n, (end - begin) * n, out.pm25.data());
    out.features = Matrix((end - begin) * n, kNumFeatures);
    std::copy_n(features.data() + begin * n * kNumFeatures, (end - begin) * n * kNumFeatures, out.features.data());
    return out;
}

void Dataset::validate() const {
    if (pm25.rows() != steps() || pm25.cols() != nodes())
        throw std::invalid_argument("PM2.5 matrix shape does not match timestamps x stations");
    if (features.rows() != steps() * nodes() || features.cols() != kNumFeatures)
        throw std::invalid_argument("feature matrix shape does not match timestamps x stations x 8");
    for (std::size_t t = 1; t < steps(); ++t)
        if (timestamps[t] - timestamps[t - 1] != kStepSeconds)
            throw std::invalid_argument("series is not on a 3-hour grid at " + format_timestamp(timestamps[t]));
    for (std::size_t t = 0; t < steps(); ++t)
        for (std::size_t i = 0; i < nodes(); ++i)
            if (!(pm25(t, i) >= 0.0))
                throw std::invalid_argument("negative or missing PM2.5 at " + format_timestamp(timestamps[t]) +
                                            " station " + stations[i].id);
    if (!features.all_finite())
        throw std::invalid_argument("non-finite weather feature");
}

Dataset load_dataset(const std::filesystem::path& stations_path, const std::filesystem::path& series_path) {
    Dataset ds;
    ds.stations = read_stations_csv(stations_path);
    const std::size_t n = ds.stations.size();
    std::unordered_map<std::string, std::size_t> station_index;
    for (std::size_t i = 0; i < n; ++i)
        station_index.emplace(ds.stations[i].id, i);

    const csv::Table table = csv::read(series_path);
    csv::require_header(table,
                        {"timestamp", "station_id", "pm25", "temp", "pbl", "kindex", "rh", "sp", "precip", "u", "v"},
                        series_path.string());

    struct Obs {
        double pm25;
        std::array<double, kNumFeatures> s;
        bool present = false;
    };
    std::map<TimePoint, std::vector<Obs>> rows;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = series_path.string() + ":" + std::to_string(table.line_numbers[r]);
        const TimePoint ts = parse_timestamp(row[0]);
        auto it = station_index.find(row[1]);
        if (it == station_index.end())
            throw std::invalid_argument(where + ": unknown station id '" + row[1] + "'");
        auto& slot = rows[ts];
        if (slot.empty())
            slot.resize(n);
        Obs& o = slot[it->second];
        if (o.present)
            throw std::invalid_argument(where + ": duplicated timestamp " + row[0] + " for station " + row[1]);
        o.present = true;
        o.pm25 = csv::parse_double(row[2], where);
        if (!(o.pm25 >= 0.0))
            throw std::invalid_argument(where + ": negative PM2.5");
        for (std::size_t k = 0; k < kNumFeatures; ++k)
            o.s[k] = csv::parse_double(row[3 + k], where);
    }
    if (rows.empty())
        throw std::invalid_argument(series_path.string() + ": no observations");

    ds.pm25 = Matrix(rows.size(), n);
    ds.features = Matrix(rows.size() * n, kNumFeatures);
    std::size_t t = 0;
    TimePoint prev = 0;
    for (const auto& [ts, slot] : rows) {
        if (t > 0 && ts - prev != kStepSeconds)
            throw std::invalid_argument(series_path.string() + ": gap before " + format_timestamp(ts) +
                                        " (expected 3-hour spacing)");
        for (std::size_t i = 0; i < n; ++i) {
            if (!slot[i].present)
                throw std::invalid_argument(series_path.string() + ": station " + ds.stations[i].id +
                                            " missing at " + format_timestamp(ts));
            ds.pm25(t, i) = slot[i].pm25;
            for (std::size_t k = 0; k < kNumFeatures; ++k)
                ds.feature(t, i, k) = slot[i].s[k];
        }
        ds.timestamps.push_back(ts);
        prev = ts;
        ++t;
    }
    ds.validate();
    return ds;
}

void write_series_csv(const std::filesystem::path& path, const Dataset& dataset) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << "timestamp,station_id,pm25,temp,pbl,kindex,rh,sp,precip,u,v\n";
    for (std::size_t t = 0; t < dataset.steps(); ++t) {
        const std::string ts = format_timestamp(dataset.timestamps[t]);
        for (std::size_t i = 0; i < dataset.nodes(); ++i) {
            out << ts << ',' << csv::quote(dataset.stations[i].id) << ',' << csv::format_double(dataset.pm25(t, i));
            for (std::size_t k = 0; k < kNumFeatures; ++k)
                out << ',' << csv::format_double(dataset.feature(t, i, k));
            out << '\n';
        }
    }
}

// --- splits ------------------------------------------------------------------

SplitScheme parse_split_scheme(std::string_view name) {
    if (name == "DATASET1" || name == "dataset1")
        return SplitScheme::Dataset1;
    if (name == "DATASET2" || name == "dataset2")
        return SplitScheme::Dataset2;
    if (name == "DATASET3" || name == "dataset3")
        return SplitScheme::Dataset3;
    if (name == "custom")
        return SplitScheme::Custom;
    throw std::invalid_argument("unknown split '" + std::string(name) + "'");
}

SplitSpec SplitSpec::named(SplitScheme scheme) {
    switch (scheme) {
    case SplitScheme::Dataset1:
        return {{make_time(2015, 1, 1), make_time(2017, 1, 1)},
                {make_time(2017, 1, 1), make_time(2018, 1, 1)},
                {make_time(2018, 1, 1), make_time(2019, 1, 1)}};
    case SplitScheme::Dataset2:
        // November 1st through the end of February, three consecutive winters.
        return {{make_time(2015, 11, 1), make_time(2016, 3, 1)},
                {make_time(2016, 11, 1), make_time(2017, 3, 1)},
                {make_time(2017, 11, 1), make_time(2018, 3, 1)}};
    case SplitScheme::Dataset3:
        // Training stops where validation starts so the splits stay disjoint.
        return {{make_time(2016, 9, 1), make_time(2016, 12, 1)},
                {make_time(2016, 12, 1), make_time(2017, 1, 1)},
                {make_time(2017, 1, 1), make_time(2017, 2, 1)}};
    case SplitScheme::Custom:
        break;
    }
    throw std::invalid_argument("custom splits need explicit ranges");
}

void SplitSpec::validate() const {
    for (const TimeRange* r : {&train, &val, &test})
        if (r->end <= r->begin)
            throw std::invalid_argument("empty split range");
    if (train.end > val.begin || val.end > test.begin)
        throw std::invalid_argument("split ranges overlap or are out of order (train < val < test required)");
}

namespace {

Dataset take_range(const Dataset& ds, const TimeRange& range, const char* name) {
    if (ds.timestamps.empty() || ds.timestamps.front() > range.begin ||
        ds.timestamps.back() < range.end - kStepSeconds)
        throw std::invalid_argument(std::string(name) + " range " + format_timestamp(range.begin) + " .. " +
                                    format_timestamp(range.end) + " is not covered by the dataset");
    const auto first = std::lower_bound(ds.timestamps.begin(), ds.timestamps.end(), range.begin);
    const auto last = std::lower_bound(ds.timestamps.begin(), ds.timestamps.end(), range.end);
    return ds.slice(static_cast<std::size_t>(first - ds.timestamps.begin()),
                    static_cast<std::size_t>(last - ds.timestamps.begin()));
}

} // namespace

SplitData split(const Dataset& dataset, const SplitSpec& ranges) {
    ranges.validate();
    return {take_range(dataset, ranges.train, "train"), take_range(dataset, ranges.val, "validation"),
            take_range(dataset, ranges.test, "test")};
}

SplitSpec ratio_split(const Dataset& dataset, double train_fraction, double val_fraction) {
    const std::size_t t = dataset.steps();
    if (!(train_fraction > 0.0) || !(val_fraction > 0.0) || train_fraction + val_fraction >= 1.0)
        throw std::invalid_argument("split fractions must be positive and sum below 1");
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(t)));
    const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(t)));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= t)
        throw std::invalid_argument("dataset too short for the requested split fractions");
    const TimePoint t0 = dataset.timestamps.front();
    const TimePoint a = t0 + static_cast<TimePoint>(n_train) * kStepSeconds;
    const TimePoint b = a + static_cast<TimePoint>(n_val) * kStepSeconds;
    const TimePoint c = dataset.timestamps.back() + kStepSeconds;
    return {{t0, a}, {a, b}, {b, c}};
}

// --- normalization -----------------------------------------------------------

namespace {
constexpr double kConstantStd = 1e-12;

void mean_std(const std::vector<double>& xs, double& mean, double& sd, bool& constant) {
    double m = 0.0;
    for (double x : xs)
        m += x;
    m /= static_cast<double>(xs.size());
    double v = 0.0;
    for (double x : xs)
        v += (x - m) * (x - m);
    v /= static_cast<double>(xs.size());
    mean = m;
    sd = std::sqrt(v);
    constant = !(sd > kConstantStd);
    if (constant)
        sd = 1.0;
}
} // namespace

NormStats fit_normalizer(const Dataset& train) {
    if (train.steps() == 0 || train.nodes() == 0)
        throw std::invalid_argument("cannot fit normalizer on an empty training split");
    NormStats st;
    mean_std(train.pm25.values(), st.pm25_mean, st.pm25_std, st.pm25_constant);
    std::vector<double> col(train.features.rows());
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
        for (std::size_t r = 0; r < train.features.rows(); ++r)
            col[r] = train.features(r, k);
        mean_std(col, st.feature_mean[k], st.feature_std[k], st.feature_constant[k]);
    }
    return st;
}

double NormStats::apply_pm25(double x) const {
    return pm25_constant ? 0.0 : (x - pm25_mean) / pm25_std;
}

double NormStats::invert_pm25(double z) const {
    return z * pm25_std + pm25_mean;
}

Matrix NormStats::apply_pm25(const Matrix& x) const {
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = apply_pm25(x[i]);
    return out;
}

Matrix NormStats::invert_pm25(const Matrix& z) const {
    Matrix out(z.rows(), z.cols());
    for (std::size_t i = 0; i < z.size(); ++i)
        out[i] = invert_pm25(z[i]);
    return out;
}

Matrix NormStats::apply_features(const Matrix& s) const {
    if (s.cols() != kNumFeatures)
        throw std::invalid_argument("feature matrix must have 8 columns");
    Matrix out(s.rows(), kNumFeatures);
    for (std::size_t r = 0; r < s.rows(); ++r)
        for (std::size_t k = 0; k < kNumFeatures; ++k)
            out(r, k) = feature_constant[k] ? 0.0 : (s(r, k) - feature_mean[k]) / feature_std[k];
    return out;
}

Matrix NormStats::invert_features(const Matrix& z) const {
    if (z.cols() != kNumFeatures)
        throw std::invalid_argument("feature matrix must have 8 columns");
    Matrix out(z.rows(), kNumFeatures);
    for (std::size_t r = 0; r < z.rows(); ++r)
        for (std::size_t k = 0; k < kNumFeatures; ++k)
            out(r, k) = z(r, k) * feature_std[k] + feature_mean[k];
    return out;
}

WindowSet make_windows(std::size_t steps, std::size_t horizon) {
    if (horizon == 0)
        throw std::invalid_argument("horizon must be positive");
    if (steps <= horizon)
        throw std::invalid_argument("split has " + std::to_string(steps) + " steps, horizon " +
                                    std::to_string(horizon) + " needs more");
    WindowSet w;
    w.horizon = horizon;
    w.starts.resize(steps - horizon);
    for (std::size_t k = 0; k < w.starts.size(); ++k)
        w.starts[k] = k;
    return w;
}

// --- synthetic generator -----------------------------------------------------

WindRegime parse_wind_regime(std::string_view name) {
    if (name == "rotating")
        return WindRegime::Rotating;
    if (name == "steady")
        return WindRegime::Steady;
    if (name == "calm")
        return WindRegime::Calm;
    throw std::invalid_argument("unknown wind regime '" + std::string(name) + "'");
}

TransportMode parse_transport_mode(std::string_view name) {
    if (name == "wind")
        return TransportMode::Wind;
    if (name == "static")
        return TransportMode::Static;
    throw std::invalid_argument("unknown transport mode '" + std::string(name) + "'");
}

std::string_view to_string(WindRegime r) {
    switch (r) {
    case WindRegime::Rotating: return "rotating";
    case WindRegime::Steady: return "steady";
    case WindRegime::Calm: return "calm";
    }
    return "?";
}

std::string_view to_string(TransportMode m) {
    return m == TransportMode::Wind ? "wind" : "static";
}

StationTable synth_stations(std::size_t n, std::uint64_t seed) {
    Rng rng(mix_seed(seed, seed_stream::kStations));
    std::uniform_real_distribution<double> lat_d(28.0, 34.0), lon_d(112.0, 119.0), alt_d(0.0, 0.4);
    constexpr double kMinSeparationKm = 60.0;
    constexpr double kKmPerDeg = kEarthRadiusKm * std::numbers::pi / 180.0;
    StationTable out;
    std::size_t attempts = 0;
    while (out.size() < n) {
        if (++attempts > 100000)
            throw std::runtime_error("could not place synthetic stations");
        const double lat = lat_d(rng), lon = lon_d(rng);
        bool ok = true;
        for (const Station& s : out) {
            const double dy = (lat - s.lat) * kKmPerDeg;
            const double dx = (lon - s.lon) * kKmPerDeg * std::cos(31.0 * std::numbers::pi / 180.0);
            if (std::hypot(dx, dy) < kMinSeparationKm) {
                ok = false;
                break;
            }
        }
        if (!ok)
            continue;
        char id[16], name[32];
        std::snprintf(id, sizeof id, "S%02zu", out.size());
        std::snprintf(name, sizeof name, "synthetic-%02zu", out.size());
        out.push_back(Station{id, name, lat, lon, alt_d(rng)});
    }
    return out;
}

std::vector<double> advection_step(const GraphTopology& topology, std::span<const double> weights,
                                   std::span<const double> x, double decay, std::span<const double> sources) {
    if (weights.size() != topology.edge_count() || x.size() != topology.n_nodes || sources.size() != x.size())
        throw std::invalid_argument("advection_step: inputs not aligned with topology");
    std::vector<double> next(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        next[i] = (1.0 - decay) * x[i] + sources[i];
    for (std::size_t e = 0; e < weights.size(); ++e) {
        const Edge& ed = topology.edges[e];
        const double flow = weights[e] * x[ed.src];
        next[ed.dst] += flow;
        next[ed.src] -= flow;
    }
    return next;
}

SynthResult synth_advection(const StationTable& stations, const GraphTopology& topology,
                            std::span<const PlanarPoint> coords, const SynthConfig& cfg) {
    const std::size_t n = stations.size();
    const std::size_t l = topology.edge_count();
    if (topology.n_nodes != n || coords.size() != n)
        throw std::invalid_argument("topology, coordinates and stations disagree");
    if (cfg.n_steps < 2)
        throw std::invalid_argument("synthetic run needs at least 2 steps");
    if (cfg.decay < 0.0 || cfg.decay > 1.0 || cfg.noise_std < 0.0 || cfg.dt <= 0.0)
        throw std::invalid_argument("invalid synthetic dynamics parameters");

    SynthResult res;
    res.topology = topology;
    res.coords.assign(coords.begin(), coords.end());

    // Planted coefficients.
    if (!cfg.planted_coeffs.empty()) {
        if (cfg.planted_coeffs.size() != l)
            throw std::invalid_argument("planted_coeffs must have one entry per edge");
        res.planted_coeffs = cfg.planted_coeffs;
    } else {
        Rng rng(mix_seed(cfg.seed, seed_stream::kCoefficients));
        std::uniform_real_distribution<double> unit(0.0, 1.0), mag(0.2, 1.0);
        res.planted_coeffs.resize(l);
        for (double& c : res.planted_coeffs)
            c = unit(rng) < cfg.zero_fraction ? 0.0 : cfg.coeff_scale * mag(rng);
    }
    for (double c : res.planted_coeffs)
        if (!(c >= 0.0))
            throw std::invalid_argument("planted coefficients must be nonnegative");

    // Sources.
    if (!cfg.source_rates.empty()) {
        if (cfg.source_rates.size() != n)
            throw std::invalid_argument("source_rates must have one entry per station");
        res.source_rates = cfg.source_rates;
    } else {
        Rng rng(mix_seed(cfg.seed, seed_stream::kSources));
        std::uniform_real_distribution<double> spread(0.5, 1.5);
        res.source_rates.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            res.source_rates[i] = cfg.base_source * spread(rng);
        if (cfg.dominant_source < n)
            res.source_rates[cfg.dominant_source] *= cfg.dominant_factor;
    }

    const std::size_t total = cfg.burn_in + cfg.n_steps;
    constexpr double kTwoPi = 2.0 * std::numbers::pi;
    constexpr double kStepsPerDay = 8.0;

    // Wind field: a regional flow with per-station perturbations.
    Matrix u(total, n), v(total, n);
    {
        Rng rng(mix_seed(cfg.seed, seed_stream::kWind));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<double> dir_offset(n), speed_factor(n);
        for (std::size_t i = 0; i < n; ++i) {
            dir_offset[i] = 0.25 * gauss(rng);
            speed_factor[i] = 0.8 + 0.4 * unit(rng);
        }
        const double base_dir = kTwoPi * unit(rng);
        const double phase = kTwoPi * unit(rng);
        double drift = 0.0;
        for (std::size_t t = 0; t < total; ++t) {
            double dir = base_dir, speed = cfg.mean_wind_speed;
            const double tt = static_cast<double>(t);
            switch (cfg.wind_regime) {
            case WindRegime::Rotating:
                drift += 0.12 * gauss(rng);
                dir = base_dir + drift + 1.5 * std::sin(kTwoPi * tt / (kStepsPerDay * 5.0));
                speed = cfg.mean_wind_speed * (1.0 + 0.5 * std::sin(kTwoPi * tt / (kStepsPerDay * 3.0) + phase)) +
                        0.3 * gauss(rng);
                break;
            case WindRegime::Steady:
                dir = base_dir + 0.05 * gauss(rng);
                speed = cfg.mean_wind_speed + 0.1 * gauss(rng);
                break;
            case WindRegime::Calm:
                speed = 0.0;
                break;
            }
            speed = std::max(speed, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double s = speed * speed_factor[i];
                u(t, i) = s * std::cos(dir + dir_offset[i]);
                v(t, i) = s * std::sin(dir + dir_offset[i]);
            }
        }
    }

    const Matrix advection = wind_advection_raw(topology, coords, u, v);

    Rng noise_rng(mix_seed(cfg.seed, seed_stream::kNoise));
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> source_phase(n);
    {
        Rng rng(mix_seed(cfg.seed, seed_stream::kSources) ^ 0x5bd1e995ULL);
        std::uniform_real_distribution<double> unit(0.0, kTwoPi);
        for (double& p : source_phase)
            p = unit(rng);
    }

    std::vector<double> x(n), next(n), out_sum(n), emission(n), weights(l);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = cfg.decay > 0.0 ? res.source_rates[i] / cfg.decay : 20.0 + res.source_rates[i];

    Dataset& ds = res.dataset;
    ds.stations = stations;
    ds.pm25 = Matrix(cfg.n_steps, n);
    ds.features = Matrix(cfg.n_steps * n, kNumFeatures);
    ds.timestamps.resize(cfg.n_steps);

    Rng weather_rng(mix_seed(cfg.seed, seed_stream::kWeather));
    std::normal_distribution<double> wnoise(0.0, 1.0);
    double mass0 = 0.0;

    for (std::size_t t = 0; t < total; ++t) {
        if (t > 0) {
            // Step t-1 -> t with transport driven by the wind at time t.
            for (std::size_t e = 0; e < l; ++e)
                weights[e] = res.planted_coeffs[e] * cfg.dt *
                             (cfg.transport == TransportMode::Wind ? advection(t, e) : 1.0);
            std::fill(out_sum.begin(), out_sum.end(), 0.0);
            for (std::size_t e = 0; e < l; ++e)
                out_sum[topology.edges[e].src] += weights[e];
            for (std::size_t i = 0; i < n; ++i) {
                res.max_weight_sum = std::max(res.max_weight_sum, out_sum[i]);
                if (out_sum[i] > 1.0)
                    throw std::domain_error("unstable transport: outgoing weight sum " + csv::format_double(out_sum[i]) +
                                            " > 1 at station " + stations[i].id +
                                            "; use smaller planted coefficients or a smaller dt");
                const double diurnal = 1.0 + 0.3 * std::sin(kTwoPi * static_cast<double>(t) / kStepsPerDay +
                                                            source_phase[i]);
                emission[i] = res.source_rates[i] * diurnal;
            }
            next = advection_step(topology, weights, x, cfg.decay, emission);
            for (std::size_t i = 0; i < n; ++i) {
                if (cfg.noise_std > 0.0)
                    next[i] += cfg.noise_std * noise(noise_rng);
                next[i] = std::max(next[i], 0.0);
            }
            x.swap(next);
        }
        if (t < cfg.burn_in)
            continue;

        const std::size_t r = t - cfg.burn_in;
        ds.timestamps[r] = cfg.start + static_cast<TimePoint>(r) * kStepSeconds;
        double mass = 0.0;
        const double tt = static_cast<double>(t);
        const double season = std::sin(kTwoPi * tt / (kStepsPerDay * 365.0) - std::numbers::pi / 2.0);
        const double day = std::sin(kTwoPi * tt / kStepsPerDay);
        for (std::size_t i = 0; i < n; ++i) {
            ds.pm25(r, i) = x[i];
            mass += x[i];
            const double src = res.source_rates[i];
            ds.feature(r, i, 0) = 12.0 + 10.0 * season + 3.0 * day + 0.5 * src + 0.3 * wnoise(weather_rng);
            ds.feature(r, i, 1) = std::max(50.0, 900.0 + 400.0 * day - 50.0 * src + 20.0 * wnoise(weather_rng));
            ds.feature(r, i, 2) = 25.0 + 8.0 * season + 2.0 * src + wnoise(weather_rng);
            ds.feature(r, i, 3) = std::clamp(
                65.0 + 15.0 * std::sin(kTwoPi * tt / (kStepsPerDay * 7.0) + static_cast<double>(i)) +
                    2.0 * wnoise(weather_rng),
                5.0, 100.0);
            ds.feature(r, i, 4) = 1010.0 - 100.0 * stations[i].altitude_km +
                                  5.0 * std::sin(kTwoPi * tt / (kStepsPerDay * 10.0)) + 0.5 * wnoise(weather_rng);
            ds.feature(r, i, 5) = 2.0 * std::max(0.0, wnoise(weather_rng) - 1.2);
            ds.feature(r, i, kWindU) = u(t, i);
            ds.feature(r, i, kWindV) = v(t, i);
        }
        if (r == 0)
            mass0 = mass;
        else if (mass0 > 0.0)
            res.mass_drift = std::max(res.mass_drift, std::abs(mass - mass0) / mass0);
    }
    ds.validate();
    return res;
}

void write_planted_edges_csv(const std::filesystem::path& path, const SynthResult& result) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << "src_id,dst_id,coeff\n";
    const auto& st = result.dataset.stations;
    for (std::size_t e = 0; e < result.topology.edge_count(); ++e) {
        const Edge& ed = result.topology.edges[e];
        out << csv::quote(st[ed.src].id) << ',' << csv::quote(st[ed.dst].id) << ','
            << csv::format_double(result.planted_coeffs[e]) << '\n';
    }
}

} // namespace dgnaea
