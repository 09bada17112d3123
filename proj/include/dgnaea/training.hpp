#ifndef DGNAEA_TRAINING_HPP
#define DGNAEA_TRAINING_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "dgnaea/autodiff.hpp"
#include "dgnaea/data.hpp"
#include "dgnaea/forecaster.hpp"
#include "dgnaea/matrix.hpp"

namespace dgnaea {

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t max_epochs = 50;
    std::size_t patience = 10;
    double lr = 5e-4;
    double weight_decay = 5e-4;
    double rho = 0.9;
    double eps = 1e-8;
    std::uint64_t seed = 0;

    /// Throws unless every field is positive (weight decay may be 0).
    void validate() const;
};

struct OptimizerState {
    std::vector<Matrix> sq_avg;  // running mean of g^2, one per parameter
    std::size_t step = 0;
};

/// v = rho v + (1 - rho) g^2;  theta -= lr g / (sqrt(v) + eps) + lr wd theta.
void rmsprop_step(std::vector<Matrix>& params, std::span<const Matrix> grads, OptimizerState& state,
                  const TrainConfig& config);

/// (1/T) sum_t (1/N) sum_i (pred - target)^2 over T x N matrices.
double mse_loss(const Matrix& pred, const Matrix& target);
/// Same loss on the tape, one prediction/target pair per step.
ad::Value mse_loss(std::span<const ad::Value> preds, std::span<const Matrix> targets);

/// Stops after `patience` consecutive epochs without a strict improvement.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

    /// Records one epoch's validation loss; true when it is a new best.
    bool update(double val_loss);
    bool should_stop() const noexcept { return stale_ >= patience_; }
    double best() const noexcept { return best_; }
    std::size_t best_epoch() const noexcept { return best_epoch_; }  // 1-based, 0 before any update

private:
    std::size_t patience_;
    std::size_t stale_ = 0;
    std::size_t epochs_ = 0;
    std::size_t best_epoch_ = 0;
    double best_ = 0.0;
};

/// A split in model units: normalized PM2.5 and features, wind edge signal in [0, 1].
struct PreparedSplit {
    std::vector<TimePoint> timestamps;
    Matrix pm25;      // T x N, normalized
    Matrix pm25_raw;  // T x N, ug/m3
    Matrix features;  // (T*N) x 8, normalized
    Matrix wind;      // T x l, empty for variants without a wind graph

    std::size_t steps() const noexcept { return timestamps.size(); }
};

/// Fits PM2.5/feature statistics and the wind edge scale on the training split.
NormStats fit_model_normalizer(const Dataset& train, const GraphTopology& topology);

PreparedSplit prepare_split(const DgnAeaModel& model, const Dataset& data);

/// Inputs and per-step targets ((B*N) x 1, normalized) for windows at `starts`.
struct WindowBatch {
    ForecastBatch inputs;
    std::vector<Matrix> targets;
};

WindowBatch make_batch(const DgnAeaModel& model, const PreparedSplit& split, std::span<const std::size_t> starts,
                       std::size_t horizon);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
};

struct TrainResult {
    DgnAeaModel model;  // best-validation parameters
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val_mse = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch RMSProp on windows of the model's horizon, shuffled per epoch
/// from the configured seed. Throws on empty splits and NumericalError on NaN.
TrainResult train(DgnAeaModel model, const PreparedSplit& train_split, const PreparedSplit& val_split,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Mean normalized-space loss over every window of `horizon` in the split.
double validation_loss(const DgnAeaModel& model, const PreparedSplit& split, std::size_t horizon,
                       std::size_t batch_size = 64);

void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history);

// --- metrics -------------------------------------------------------------------

struct HorizonMetrics {
    std::size_t horizon = 0;
    double mae = 0.0;
    double rmse = 0.0;
    std::size_t count = 0;  // pooled residuals
};

struct MetricsReport {
    std::vector<HorizonMetrics> rows;

    const HorizonMetrics& at(std::size_t horizon) const;
};

inline constexpr std::size_t kDefaultHorizons[] = {3, 6, 12, 24};

/// Pools residuals over nodes, windows and lead steps <= each horizon.
class MetricsAccumulator {
public:
    explicit MetricsAccumulator(std::vector<std::size_t> horizons);

    std::size_t max_horizon() const noexcept { return max_horizon_; }
    /// Residual pred - truth at lead step `lead` (1-based).
    void add(std::size_t lead, double residual);
    MetricsReport report() const;

private:
    std::vector<std::size_t> horizons_;
    std::size_t max_horizon_ = 0;
    std::vector<double> abs_sum_, sq_sum_;  // per lead step
    std::vector<std::size_t> count_;
};

/// MAE and RMSE of pooled residuals.
HorizonMetrics pooled_metrics(std::span<const double> pred, std::span<const double> truth);

/// Rolls the model out to the largest horizon from every admissible window
/// and scores it in ug/m3. Throws when the split is too short.
MetricsReport evaluate(const DgnAeaModel& model, const PreparedSplit& split,
                       std::span<const std::size_t> horizons = kDefaultHorizons, std::size_t batch_size = 64);

/// `horizon,mae,rmse` rows.
void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report);

} // namespace dgnaea

#endif // DGNAEA_TRAINING_HPP
