#ifndef DGNAEA_BASELINES_HPP
#define DGNAEA_BASELINES_HPP

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "dgnaea/data.hpp"
#include "dgnaea/training.hpp"

namespace dgnaea {

/// Weekday (Monday = 0) x 3-hour bin.
inline constexpr std::size_t kWeeklySlots = 7 * 8;

/// Slot of a timestamp in the weekly profile, 0 .. 55.
std::size_t weekly_slot(TimePoint t);

/// Historical average per station and weekly slot.
struct WeeklyProfile {
    std::size_t nodes = 0;
    Matrix mean;                      // 56 x N
    Matrix count;                     // 56 x N, contributing observations
    std::vector<double> global_mean;  // per station

    bool empty_slot(std::size_t slot, std::size_t station) const { return count(slot, station) == 0.0; }
    double predict(TimePoint t, std::size_t station) const;
};

/// Throws on an empty training split.
WeeklyProfile fit_ha(const Dataset& train);

/// T x N predictions; empty slots fall back to the station's global mean.
Matrix predict_ha(const WeeklyProfile& profile, std::span<const TimePoint> timestamps);

/// Scores the profile on the same windows `evaluate` uses for the model.
/// Predictions do not depend on the lead step.
MetricsReport evaluate_ha(const WeeklyProfile& profile, const Dataset& test,
                          std::span<const std::size_t> horizons = kDefaultHorizons);

} // namespace dgnaea

#endif // DGNAEA_BASELINES_HPP
