#ifndef DGNAEA_DATA_HPP
#define DGNAEA_DATA_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dgnaea/geo_graph.hpp"
#include "dgnaea/matrix.hpp"

namespace dgnaea {

/// Seconds since 1970-01-01T00:00:00 UTC.
using TimePoint = std::int64_t;
inline constexpr TimePoint kStepSeconds = 3 * 3600;

/// Accepts YYYY-MM-DDTHH:MM:SS (or a space instead of T, optional trailing Z).
TimePoint parse_timestamp(std::string_view text);
std::string format_timestamp(TimePoint t);
TimePoint make_time(int year, unsigned month, unsigned day, unsigned hour = 0);

inline constexpr std::size_t kNumFeatures = 8;
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {"temp", "pbl", "kindex", "rh",
                                                                             "sp",   "precip", "u", "v"};
inline constexpr std::size_t kWindU = 6;
inline constexpr std::size_t kWindV = 7;

/// Aligned PM2.5 and weather series on a gap-free 3-hour grid.
struct Dataset {
    StationTable stations;
    std::vector<TimePoint> timestamps;
    Matrix pm25;      // T x N, ug/m3
    Matrix features;  // (T * N) x 8, row t * N + i

    std::size_t steps() const noexcept { return timestamps.size(); }
    std::size_t nodes() const noexcept { return stations.size(); }

    double feature(std::size_t t, std::size_t i, std::size_t k) const { return features(t * nodes() + i, k); }
    double& feature(std::size_t t, std::size_t i, std::size_t k) { return features(t * nodes() + i, k); }
    /// N x 8 block for time step t.
    Matrix features_at(std::size_t t) const;
    /// T x N matrix of one feature column.
    Matrix feature_series(std::size_t k) const;

    /// Rows [begin, end).
    Dataset slice(std::size_t begin, std::size_t end) const;
    /// Throws on shape mismatch, gaps, or negative PM2.5.
    void validate() const;
};

/// Reads the stations file and the long-format series
/// `timestamp,station_id,pm25,temp,pbl,kindex,rh,sp,precip,u,v`.
Dataset load_dataset(const std::filesystem::path& stations_path, const std::filesystem::path& series_path);
void write_series_csv(const std::filesystem::path& path, const Dataset& dataset);

struct TimeRange {
    TimePoint begin = 0;  // inclusive
    TimePoint end = 0;    // exclusive
};

enum class SplitScheme { Dataset1, Dataset2, Dataset3, Custom };

SplitScheme parse_split_scheme(std::string_view name);

struct SplitSpec {
    TimeRange train;
    TimeRange val;
    TimeRange test;

    static SplitSpec named(SplitScheme scheme);
    /// Throws unless ranges are non-empty, non-overlapping and ordered train < val < test.
    void validate() const;
};

struct SplitData {
    Dataset train;
    Dataset val;
    Dataset test;
};

/// Throws when the dataset does not cover a requested range.
SplitData split(const Dataset& dataset, const SplitSpec& ranges);

/// Consecutive fractions of the time axis, e.g. {0.6, 0.2, 0.2}.
SplitSpec ratio_split(const Dataset& dataset, double train_fraction, double val_fraction);

/// z-score statistics fitted on the training split only.
struct NormStats {
    double pm25_mean = 0.0;
    double pm25_std = 1.0;
    bool pm25_constant = false;
    std::array<double, kNumFeatures> feature_mean{};
    std::array<double, kNumFeatures> feature_std{};
    std::array<bool, kNumFeatures> feature_constant{};
    double wind_scale = 1.0;  // raw wind advection mapped to 1

    double apply_pm25(double x) const;
    double invert_pm25(double z) const;
    Matrix apply_pm25(const Matrix& x) const;
    Matrix invert_pm25(const Matrix& z) const;
    /// Rows are stations (or station-times), 8 columns.
    Matrix apply_features(const Matrix& s) const;
    Matrix invert_features(const Matrix& z) const;

    friend bool operator==(const NormStats&, const NormStats&) = default;
};

NormStats fit_normalizer(const Dataset& train);

/// Stride-1 forecast windows: window k uses x at k and targets k+1..k+horizon.
struct WindowSet {
    std::size_t horizon = 0;
    std::vector<std::size_t> starts;
};

/// Throws when steps <= horizon.
WindowSet make_windows(std::size_t steps, std::size_t horizon);

// --- synthetic advection generator ----------------------------------------

enum class WindRegime { Rotating, Steady, Calm };
enum class TransportMode { Wind, Static };

WindRegime parse_wind_regime(std::string_view name);
TransportMode parse_transport_mode(std::string_view name);
std::string_view to_string(WindRegime r);
std::string_view to_string(TransportMode m);

struct SynthConfig {
    std::size_t n_stations = 16;
    std::size_t n_steps = 2000;
    std::size_t burn_in = 200;
    TimePoint start = make_time(2015, 1, 1);
    WindRegime wind_regime = WindRegime::Rotating;
    TransportMode transport = TransportMode::Wind;
    double mean_wind_speed = 4.0;  // m/s
    // Planted coefficient per edge: 0 with probability zero_fraction,
    // otherwise coeff_scale * uniform(0.2, 1).
    double coeff_scale = 4.0;
    double zero_fraction = 0.3;
    std::vector<double> planted_coeffs;  // explicit override, one per edge
    double base_source = 1.0;            // per-step emission, ug/m3
    std::size_t dominant_source = std::numeric_limits<std::size_t>::max();
    double dominant_factor = 4.0;
    std::vector<double> source_rates;  // explicit override, one per station
    double decay = 0.05;
    double noise_std = 0.3;
    double dt = 1.0;
    std::uint64_t seed = 0;
};

struct SynthResult {
    Dataset dataset;
    GraphTopology topology;
    std::vector<PlanarPoint> coords;
    std::vector<double> planted_coeffs;  // per topology edge
    std::vector<double> source_rates;    // per station
    double max_weight_sum = 0.0;         // max over nodes/time of outgoing transport
    double mass_drift = 0.0;             // max |sum x_t - sum x_0| / sum x_0
};

/// One transport update with per-edge weights w_e for this step:
///   x_i' = (1 - decay) x_i + sources_i + sum_{e: dst=i} w_e x_src - sum_{e: src=i} w_e x_i.
std::vector<double> advection_step(const GraphTopology& topology, std::span<const double> weights,
                                   std::span<const double> x, double decay, std::span<const double> sources);

/// Stations scattered over a ~600 km square with a minimum separation.
StationTable synth_stations(std::size_t n, std::uint64_t seed);

/// Simulates x_i' = (1 - decay) x_i + sum_j (w_ji x_j - w_ij x_i) + source_i + noise
/// with w_ij = coeff_ij * dt * advection_ij (wind mode) or coeff_ij * dt (static mode).
/// Throws std::domain_error when some node's outgoing weight sum exceeds 1.
SynthResult synth_advection(const StationTable& stations, const GraphTopology& topology,
                            std::span<const PlanarPoint> coords, const SynthConfig& config);

void write_planted_edges_csv(const std::filesystem::path& path, const SynthResult& result);

} // namespace dgnaea

#endif // DGNAEA_DATA_HPP
