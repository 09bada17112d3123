#include "dgnaea/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "dgnaea/csv.hpp"
#include "dgnaea/params.hpp"

namespace dgnaea {

void TrainConfig::validate() const {
    if (batch_size == 0 || max_epochs == 0 || patience == 0)
        throw std::invalid_argument("batch_size, max_epochs and patience must be positive");
    if (!(lr > 0.0) || !(weight_decay >= 0.0) || !(rho > 0.0 && rho < 1.0) || !(eps > 0.0))
        throw std::invalid_argument("lr and eps must be positive, rho in (0, 1), weight_decay >= 0");
}

void rmsprop_step(std::vector<Matrix>& params, std::span<const Matrix> grads, OptimizerState& state,
                  const TrainConfig& c) {
    if (grads.size() != params.size())
        throw std::invalid_argument("gradient count does not match parameters");
    if (state.sq_avg.empty())
        for (const Matrix& p : params)
            state.sq_avg.emplace_back(p.rows(), p.cols());
    if (state.sq_avg.size() != params.size())
        throw std::invalid_argument("optimizer state does not match parameters");
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& p = params[k];
        const Matrix& g = grads[k];
        Matrix& v = state.sq_avg[k];
        if (!p.same_shape(g) || !p.same_shape(v))
            throw std::invalid_argument("gradient shape does not match parameter");
        for (std::size_t i = 0; i < p.size(); ++i) {
            v[i] = c.rho * v[i] + (1.0 - c.rho) * g[i] * g[i];
            p[i] -= c.lr * g[i] / (std::sqrt(v[i]) + c.eps) + c.lr * c.weight_decay * p[i];
        }
    }
    ++state.step;
}

double mse_loss(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target))
        throw std::invalid_argument("mse_loss shape mismatch");
    if (pred.size() == 0)
        throw std::invalid_argument("mse_loss of an empty matrix");
    double total = 0.0;
    for (std::size_t t = 0; t < pred.rows(); ++t) {
        double row = 0.0;
        for (std::size_t i = 0; i < pred.cols(); ++i) {
            const double r = pred(t, i) - target(t, i);
            row += r * r;
        }
        total += row / static_cast<double>(pred.cols());
    }
    return total / static_cast<double>(pred.rows());
}

ad::Value mse_loss(std::span<const ad::Value> preds, std::span<const Matrix> targets) {
    if (preds.empty() || preds.size() != targets.size())
        throw std::invalid_argument("mse_loss needs one target per prediction step");
    ad::Tape& tape = *preds[0].tape();
    ad::Value total;
    for (std::size_t t = 0; t < preds.size(); ++t) {
        const ad::Value step = ad::mean_squared_error(preds[t], tape.constant(targets[t]));
        total = t == 0 ? step : ad::add(total, step);
    }
    return ad::affine(total, 1.0 / static_cast<double>(preds.size()), 0.0);
}

bool EarlyStopping::update(double val_loss) {
    ++epochs_;
    if (best_epoch_ == 0 || val_loss < best_) {
        best_ = val_loss;
        best_epoch_ = epochs_;
        stale_ = 0;
        return true;
    }
    ++stale_;
    return false;
}

// --- data preparation ------------------------------------------------------------

namespace {

Matrix wind_raw(const GraphTopology& topology, const Dataset& data) {
    const auto coords = project_stations(data.stations);
    return wind_advection_raw(topology, coords, data.feature_series(kWindU), data.feature_series(kWindV));
}

} // namespace

NormStats fit_model_normalizer(const Dataset& train, const GraphTopology& topology) {
    NormStats st = fit_normalizer(train);
    if (topology.edge_count() > 0) {
        const Matrix raw = wind_raw(topology, train);
        st.wind_scale = fit_edge_scale(raw, 0, raw.rows());
    }
    return st;
}

PreparedSplit prepare_split(const DgnAeaModel& model, const Dataset& data) {
    if (data.nodes() != model.stations.size())
        throw std::invalid_argument("dataset has " + std::to_string(data.nodes()) + " stations, model has " +
                                    std::to_string(model.stations.size()));
    for (std::size_t i = 0; i < data.nodes(); ++i)
        if (data.stations[i].id != model.stations[i].id)
            throw std::invalid_argument("dataset station order differs from the model at '" + data.stations[i].id +
                                        "'");
    PreparedSplit p;
    p.timestamps = data.timestamps;
    p.pm25_raw = data.pm25;
    p.pm25 = model.norm.apply_pm25(data.pm25);
    p.features = model.norm.apply_features(data.features);
    if (!p.pm25.all_finite() || !p.features.all_finite())
        throw NumericalError("non-finite value after normalization");
    if (uses_wind_graph(model.config.variant)) {
        // Projection uses the model's station table so train and test share coordinates.
        const auto coords = project_stations(model.stations);
        const Matrix raw = wind_advection_raw(model.topology, coords, data.feature_series(kWindU),
                                              data.feature_series(kWindV));
        p.wind = normalize_edge_signal(raw, model.norm.wind_scale).values;
    }
    return p;
}

WindowBatch make_batch(const DgnAeaModel& model, const PreparedSplit& split, std::span<const std::size_t> starts,
                       std::size_t horizon) {
    const std::size_t n = model.stations.size(), l = model.topology.edge_count();
    const std::size_t b = starts.size();
    const bool wind = uses_wind_graph(model.config.variant);
    WindowBatch wb;
    wb.inputs.batch = b;
    wb.inputs.x0 = Matrix(b * n, 1);
    for (std::size_t w = 0; w < b; ++w) {
        if (starts[w] + horizon >= split.steps())
            throw std::out_of_range("window extends past the end of the split");
        for (std::size_t i = 0; i < n; ++i)
            wb.inputs.x0(w * n + i, 0) = split.pm25(starts[w], i);
    }
    for (std::size_t t = 1; t <= horizon; ++t) {
        Matrix f(b * n, kNumFeatures), y(b * n, 1);
        for (std::size_t w = 0; w < b; ++w) {
            const std::size_t k = starts[w] + t;
            std::copy_n(split.features.data() + k * n * kNumFeatures, n * kNumFeatures,
                        f.data() + w * n * kNumFeatures);
            for (std::size_t i = 0; i < n; ++i)
                y(w * n + i, 0) = split.pm25(k, i);
        }
        wb.inputs.features.push_back(std::move(f));
        wb.targets.push_back(std::move(y));
        if (wind) {
            Matrix z(b * l, 1);
            for (std::size_t w = 0; w < b; ++w)
                std::copy_n(split.wind.data() + (starts[w] + t) * l, l, z.data() + w * l);
            wb.inputs.wind.push_back(std::move(z));
        }
    }
    return wb;
}

// --- training loop -----------------------------------------------------------------

double validation_loss(const DgnAeaModel& model, const PreparedSplit& split, std::size_t horizon,
                       std::size_t batch_size) {
    const WindowSet windows = make_windows(split.steps(), horizon);
    double total = 0.0;
    for (std::size_t begin = 0; begin < windows.starts.size(); begin += batch_size) {
        const std::size_t end = std::min(begin + batch_size, windows.starts.size());
        const std::span<const std::size_t> starts(windows.starts.data() + begin, end - begin);
        const WindowBatch wb = make_batch(model, split, starts, horizon);
        const auto preds = forecast_normalized(model, wb.inputs);
        double batch_loss = 0.0;
        for (std::size_t t = 0; t < horizon; ++t)
            batch_loss += mse_loss(preds[t], wb.targets[t]);
        total += batch_loss / static_cast<double>(horizon) * static_cast<double>(end - begin);
    }
    const double loss = total / static_cast<double>(windows.starts.size());
    if (!std::isfinite(loss))
        throw NumericalError("validation loss is not finite");
    return loss;
}

TrainResult train(DgnAeaModel model, const PreparedSplit& train_split, const PreparedSplit& val_split,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    const std::size_t horizon = model.config.horizon;
    if (train_split.steps() == 0 || val_split.steps() == 0)
        throw std::invalid_argument("training and validation splits must be non-empty");
    WindowSet windows = make_windows(train_split.steps(), horizon);
    make_windows(val_split.steps(), horizon);

    Rng shuffle_rng(mix_seed(config.seed, seed_stream::kShuffle));
    OptimizerState opt;
    EarlyStopping stopper(config.patience);
    TrainResult result;
    result.model = model;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::shuffle(windows.starts.begin(), windows.starts.end(), shuffle_rng);
        double train_total = 0.0;
        for (std::size_t begin = 0; begin < windows.starts.size(); begin += config.batch_size) {
            const std::size_t end = std::min(begin + config.batch_size, windows.starts.size());
            const std::span<const std::size_t> starts(windows.starts.data() + begin, end - begin);
            const WindowBatch wb = make_batch(model, train_split, starts, horizon);

            ad::Tape tape;
            const BoundModel bound(tape, model, starts.size(), true);
            const auto preds = bound.forward(wb.inputs);
            const ad::Value loss = mse_loss(preds, wb.targets);
            if (!std::isfinite(loss.scalar()))
                throw NumericalError("training loss is not finite at epoch " + std::to_string(epoch));
            tape.backward(loss);
            const std::vector<Matrix> grads = bound.params().gradients();
            rmsprop_step(model.params.values(), grads, opt, config);
            train_total += loss.scalar() * static_cast<double>(starts.size());
        }
        for (const Matrix& p : model.params.values())
            if (!p.all_finite())
                throw NumericalError("parameters diverged at epoch " + std::to_string(epoch));

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_mse = train_total / static_cast<double>(windows.starts.size());
        rec.val_mse = validation_loss(model, val_split, horizon);
        result.history.push_back(rec);
        if (stopper.update(rec.val_mse))
            result.model = model;
        if (on_epoch)
            on_epoch(rec);
        if (stopper.should_stop())
            break;
    }
    result.best_epoch = stopper.best_epoch();
    result.best_val_mse = stopper.best();
    return result;
}

void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << "epoch,train_mse,val_mse\n";
    for (const auto& r : history)
        out << r.epoch << ',' << csv::format_double(r.train_mse) << ',' << csv::format_double(r.val_mse) << '\n';
}

// --- metrics -------------------------------------------------------------------

const HorizonMetrics& MetricsReport::at(std::size_t horizon) const {
    for (const auto& r : rows)
        if (r.horizon == horizon)
            return r;
    throw std::out_of_range("no metrics for horizon " + std::to_string(horizon));
}

MetricsAccumulator::MetricsAccumulator(std::vector<std::size_t> horizons) : horizons_(std::move(horizons)) {
    if (horizons_.empty())
        throw std::invalid_argument("at least one horizon is required");
    for (std::size_t h : horizons_) {
        if (h == 0)
            throw std::invalid_argument("horizons must be positive");
        max_horizon_ = std::max(max_horizon_, h);
    }
    abs_sum_.assign(max_horizon_, 0.0);
    sq_sum_.assign(max_horizon_, 0.0);
    count_.assign(max_horizon_, 0);
}

void MetricsAccumulator::add(std::size_t lead, double residual) {
    if (lead == 0 || lead > max_horizon_)
        throw std::out_of_range("lead step outside the evaluated horizons");
    abs_sum_[lead - 1] += std::abs(residual);
    sq_sum_[lead - 1] += residual * residual;
    ++count_[lead - 1];
}

MetricsReport MetricsAccumulator::report() const {
    MetricsReport rep;
    for (std::size_t h : horizons_) {
        double a = 0.0, s = 0.0;
        std::size_t c = 0;
        for (std::size_t k = 0; k < h; ++k) {
            a += abs_sum_[k];
            s += sq_sum_[k];
            c += count_[k];
        }
        HorizonMetrics m;
        m.horizon = h;
        m.count = c;
        if (c > 0) {
            m.mae = a / static_cast<double>(c);
            m.rmse = std::sqrt(s / static_cast<double>(c));
        }
        rep.rows.push_back(m);
    }
    return rep;
}

HorizonMetrics pooled_metrics(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size() || pred.empty())
        throw std::invalid_argument("metrics need equal-length, non-empty series");
    MetricsAccumulator acc({1});
    for (std::size_t i = 0; i < pred.size(); ++i)
        acc.add(1, pred[i] - truth[i]);
    return acc.report().rows[0];
}

MetricsReport evaluate(const DgnAeaModel& model, const PreparedSplit& split, std::span<const std::size_t> horizons,
                       std::size_t batch_size) {
    MetricsAccumulator acc(std::vector<std::size_t>(horizons.begin(), horizons.end()));
    const std::size_t h = acc.max_horizon();
    if (split.steps() <= h)
        throw std::invalid_argument("horizon " + std::to_string(h) + " exceeds the " + std::to_string(split.steps()) +
                                    "-step evaluation split");
    const WindowSet windows = make_windows(split.steps(), h);
    const std::size_t n = model.stations.size();
    for (std::size_t begin = 0; begin < windows.starts.size(); begin += batch_size) {
        const std::size_t end = std::min(begin + batch_size, windows.starts.size());
        const std::span<const std::size_t> starts(windows.starts.data() + begin, end - begin);
        const WindowBatch wb = make_batch(model, split, starts, h);
        const auto preds = forecast_normalized(model, wb.inputs);
        for (std::size_t t = 0; t < h; ++t)
            for (std::size_t w = 0; w < starts.size(); ++w)
                for (std::size_t i = 0; i < n; ++i) {
                    const double y = model.norm.invert_pm25(preds[t](w * n + i, 0));
                    if (!std::isfinite(y))
                        throw NumericalError("forecast produced non-finite values");
                    acc.add(t + 1, y - split.pm25_raw(starts[w] + t + 1, i));
                }
    }
    return acc.report();
}

void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << "horizon,mae,rmse\n";
    for (const auto& r : report.rows)
        out << r.horizon << ',' << csv::format_double(r.mae) << ',' << csv::format_double(r.rmse) << '\n';
}

} // namespace dgnaea
