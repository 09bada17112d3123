#include "dgnaea/baselines.hpp"

#include <chrono>
#include <stdexcept>
#include <string>

namespace dgnaea {

std::size_t weekly_slot(TimePoint t) {
    using namespace std::chrono;
    const auto day_count = t >= 0 ? t / 86400 : (t - 86399) / 86400;
    const TimePoint secs = t - day_count * 86400;
    const weekday wd{sys_days{days{day_count}}};
    return static_cast<std::size_t>(wd.iso_encoding() - 1) * 8 + static_cast<std::size_t>(secs / kStepSeconds);
}

double WeeklyProfile::predict(TimePoint t, std::size_t station) const {
    const std::size_t s = weekly_slot(t);
    return empty_slot(s, station) ? global_mean[station] : mean(s, station);
}

WeeklyProfile fit_ha(const Dataset& train) {
    if (train.steps() == 0 || train.nodes() == 0)
        throw std::invalid_argument("cannot fit the historical average on an empty split");
    const std::size_t n = train.nodes();
    WeeklyProfile p;
    p.nodes = n;
    p.mean = Matrix(kWeeklySlots, n);
    p.count = Matrix(kWeeklySlots, n);
    p.global_mean.assign(n, 0.0);
    for (std::size_t t = 0; t < train.steps(); ++t) {
        const std::size_t s = weekly_slot(train.timestamps[t]);
        for (std::size_t i = 0; i < n; ++i) {
            p.mean(s, i) += train.pm25(t, i);
            p.count(s, i) += 1.0;
            p.global_mean[i] += train.pm25(t, i);
        }
    }
    for (std::size_t s = 0; s < kWeeklySlots; ++s)
        for (std::size_t i = 0; i < n; ++i)
            if (p.count(s, i) > 0.0)
                p.mean(s, i) /= p.count(s, i);
    for (double& g : p.global_mean)
        g /= static_cast<double>(train.steps());
    return p;
}

Matrix predict_ha(const WeeklyProfile& profile, std::span<const TimePoint> timestamps) {
    Matrix out(timestamps.size(), profile.nodes);
    for (std::size_t t = 0; t < timestamps.size(); ++t)
        for (std::size_t i = 0; i < profile.nodes; ++i)
            out(t, i) = profile.predict(timestamps[t], i);
    return out;
}

MetricsReport evaluate_ha(const WeeklyProfile& profile, const Dataset& test, std::span<const std::size_t> horizons) {
    if (test.nodes() != profile.nodes)
        throw std::invalid_argument("profile and test split have different station counts");
    MetricsAccumulator acc(std::vector<std::size_t>(horizons.begin(), horizons.end()));
    const std::size_t h = acc.max_horizon();
    const WindowSet windows = make_windows(test.steps(), h);
    const Matrix pred = predict_ha(profile, test.timestamps);
    for (std::size_t k : windows.starts)
        for (std::size_t t = 1; t <= h; ++t)
            for (std::size_t i = 0; i < test.nodes(); ++i)
                acc.add(t, pred(k + t, i) - test.pm25(k + t, i));
    return acc.report();
}

} // namespace dgnaea
