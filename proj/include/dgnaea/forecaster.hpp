#ifndef DGNAEA_FORECASTER_HPP
#define DGNAEA_FORECASTER_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dgnaea/autodiff.hpp"
#include "dgnaea/data.hpp"
#include "dgnaea/geo_graph.hpp"
#include "dgnaea/params.hpp"
#include "dgnaea/spatial.hpp"
#include "dgnaea/temporal.hpp"

namespace dgnaea {

/// Raised when NaN or Inf reaches the model.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Variant { AeaWind, OnlyWind, OnlyAea, Static, WoWeather };

inline constexpr std::array<Variant, 5> kAllVariants = {Variant::AeaWind, Variant::OnlyWind, Variant::OnlyAea,
                                                        Variant::Static, Variant::WoWeather};

std::string_view to_string(Variant v);
/// Accepts AEA_WIND / ONLY_WIND / ONLY_AEA / STATIC / WO_WEATHER, any case.
Variant parse_variant(std::string_view name);

bool uses_wind_graph(Variant v);
bool uses_adaptive_edges(Variant v);
bool uses_fusion(Variant v);

struct ModelConfig {
    Variant variant = Variant::AeaWind;
    std::size_t edge_hidden = 32;  // h_e
    std::size_t hidden = 32;       // h
    std::size_t horizon = 6;       // training horizon T
    std::uint64_t seed = 0;
};

struct DgnAeaModel {
    ModelConfig config;
    StationTable stations;
    GraphTopology topology;
    NormStats norm;
    ParamStore params;

    bool has_adaptive_edges() const { return params.contains("adaptive_edges"); }
    std::size_t parameter_count() const { return params.scalar_count(); }
};

/// MLP weights uniform(+-sqrt(1/fan_in)), biases zero, adaptive edges
/// uniform(-0.1, 0.1). Deterministic in (config, topology).
DgnAeaModel init_model(const ModelConfig& config, const StationTable& stations, const GraphTopology& topology);

/// B stacked forecast windows in normalized units.
struct ForecastBatch {
    std::size_t batch = 1;
    Matrix x0;                     // (B*N) x 1
    std::vector<Matrix> features;  // per step, (B*N) x 8
    std::vector<Matrix> wind;      // per step, (B*l) x 1; empty when the variant ignores wind

    std::size_t horizon() const noexcept { return features.size(); }
};

/// Every intermediate of one rollout step.
struct StepState {
    ad::Value embed;
    ad::Value messages_wind, messages_aea;
    ad::Value e_wind, e_aea;
    ad::Value fused;
    temporal::GruStep gru;
    ad::Value output;
};

/// Model parameters recorded on a tape, ready to run batches of size B.
class BoundModel {
public:
    BoundModel(ad::Tape& tape, const DgnAeaModel& model, std::size_t batch, bool trainable);

    /// One (B*N) x 1 normalized prediction per step.
    std::vector<ad::Value> forward(const ForecastBatch& inputs, std::vector<StepState>* states = nullptr) const;

    const BoundParams& params() const noexcept { return params_; }
    const spatial::GraphIndex& graph() const noexcept { return graph_; }

private:
    ad::Tape* tape_;
    const DgnAeaModel* model_;
    std::size_t batch_;
    BoundParams params_;
    spatial::GraphIndex graph_;
    std::shared_ptr<const ad::RowIndex> edge_tile_;
};

/// Normalized predictions for a batch, one (B*N) x 1 matrix per step.
std::vector<Matrix> forecast_normalized(const DgnAeaModel& model, const ForecastBatch& inputs);

struct ForecastResult {
    Matrix values;  // T x N, ug/m3
    std::vector<TimePoint> timestamps;
};

/// Single-window rollout from normalized inputs: x0 (N x 1), features (T of
/// N x 8), wind (T x l; may be empty for variants without a wind graph).
/// Output is denormalized.
ForecastResult forecast(const DgnAeaModel& model, const Matrix& x0, const std::vector<Matrix>& features,
                        const Matrix& wind, std::vector<TimePoint> timestamps = {});

struct AdaptiveEdgeRow {
    std::string src_id;
    std::string dst_id;
    double value = 0.0;
};

struct EdgeAsymmetryRow {
    std::string a_id;
    std::string b_id;
    double a_to_b = 0.0;
    double b_to_a = 0.0;
    double difference = 0.0;  // a_to_b - b_to_a
};

/// Throws std::invalid_argument for variants without adaptive edges.
std::vector<AdaptiveEdgeRow> export_adaptive_edges(const DgnAeaModel& model);
/// One row per unordered pair with both directions present, a < b by index.
std::vector<EdgeAsymmetryRow> adaptive_edge_asymmetry(const DgnAeaModel& model);
void write_adaptive_edges_csv(const std::filesystem::path& path, const std::vector<AdaptiveEdgeRow>& rows);
void write_edge_asymmetry_csv(const std::filesystem::path& path, const std::vector<EdgeAsymmetryRow>& rows);

/// Self-describing JSON checkpoint; save/load round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const DgnAeaModel& model);
DgnAeaModel load_checkpoint(const std::filesystem::path& path);

} // namespace dgnaea

#endif // DGNAEA_FORECASTER_HPP
