#include <doctest.h>

#include <cmath>

#include "dgnaea/baselines.hpp"
#include "support/fixtures.hpp"

using namespace dgnaea;

namespace {

Dataset series_from(TimePoint start, std::size_t steps, std::size_t n, auto value) {
    Dataset ds;
    ds.stations = fixtures::make_stations(n);
    ds.pm25 = Matrix(steps, n);
    ds.features = Matrix(steps * n, kNumFeatures);
    for (std::size_t t = 0; t < steps; ++t) {
        ds.timestamps.push_back(start + static_cast<TimePoint>(t) * kStepSeconds);
        for (std::size_t i = 0; i < n; ++i)
            ds.pm25(t, i) = value(ds.timestamps[t], i);
    }
    return ds;
}

constexpr TimePoint kWeek = 7 * 86400;

} // namespace

TEST_CASE("weekly slots follow ISO weekdays and 3-hour bins") {
    CHECK(weekly_slot(make_time(2018, 1, 1, 0)) == 0);    // Monday
    CHECK(weekly_slot(make_time(2018, 1, 1, 21)) == 7);
    CHECK(weekly_slot(make_time(2018, 1, 2, 3)) == 9);
    CHECK(weekly_slot(make_time(2018, 1, 7, 21)) == 55);  // Sunday
    CHECK(weekly_slot(make_time(1970, 1, 1, 0)) == 24);   // Thursday
    for (TimePoint t = make_time(2016, 1, 1); t < make_time(2016, 1, 1) + 2 * kWeek; t += kStepSeconds)
        CHECK(weekly_slot(t) == weekly_slot(t + kWeek));
}

TEST_CASE("each slot averages its own observations") {
    const TimePoint monday = make_time(2018, 1, 1);
    // Two weeks: first week 10, second week 20 at station 0; station 1 is slot-dependent.
    const Dataset ds = series_from(monday, 2 * 56, 2, [&](TimePoint t, std::size_t i) {
        if (i == 0)
            return t < monday + kWeek ? 10.0 : 20.0;
        return static_cast<double>(weekly_slot(t));
    });
    const WeeklyProfile p = fit_ha(ds);
    for (std::size_t s = 0; s < kWeeklySlots; ++s) {
        CHECK(p.mean(s, 0) == 15.0);
        CHECK(p.mean(s, 1) == static_cast<double>(s));
        CHECK(p.count(s, 0) == 2.0);
    }
    CHECK(p.global_mean[0] == 15.0);
}

TEST_CASE("an empty slot falls back to the station mean") {
    const TimePoint monday = make_time(2018, 1, 1);
    const Dataset ds = series_from(monday, 8, 2, [](TimePoint, std::size_t i) { return i == 0 ? 4.0 : 8.0; });
    const WeeklyProfile p = fit_ha(ds);
    CHECK(p.empty_slot(20, 0));
    CHECK_FALSE(p.empty_slot(3, 1));
    const TimePoint wednesday = make_time(2018, 1, 3, 12);
    CHECK(p.predict(wednesday, 0) == 4.0);
    CHECK(p.predict(wednesday, 1) == 8.0);
}

TEST_CASE("fitting on an empty split fails") {
    Dataset empty;
    empty.stations = fixtures::make_stations(2);
    CHECK_THROWS_AS(fit_ha(empty), std::invalid_argument);
}

TEST_CASE("predictions depend only on the target time") {
    fixtures::Rng rng(81);
    const TimePoint start = make_time(2017, 3, 1);
    const Dataset train = series_from(start, 4 * 56, 3, [&](TimePoint, std::size_t) {
        return fixtures::uniform(rng, 0, 200);
    });
    const WeeklyProfile p = fit_ha(train);
    std::vector<TimePoint> a, b;
    for (std::size_t k = 0; k < 30; ++k)
        a.push_back(start + 5 * kWeek + static_cast<TimePoint>(k) * kStepSeconds);
    b.assign(a.begin() + 10, a.end());
    const Matrix pa = predict_ha(p, a), pb = predict_ha(p, b);
    for (std::size_t t = 0; t < b.size(); ++t)
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(pa(t + 10, i) == pb(t, i));
}

TEST_CASE("a weekly periodic series is predicted exactly at every horizon") {
    const TimePoint start = make_time(2017, 6, 5);
    auto periodic = [](TimePoint t, std::size_t i) { return 20.0 + 3.0 * static_cast<double>(weekly_slot(t) + i); };
    const WeeklyProfile p = fit_ha(series_from(start, 3 * 56, 4, periodic));
    const Dataset test = series_from(start + 10 * kWeek + 5 * kStepSeconds, 100, 4, periodic);
    const auto rep = evaluate_ha(p, test);
    REQUIRE(rep.rows.size() == 4);
    for (const auto& r : rep.rows) {
        CHECK(r.mae == 0.0);
        CHECK(r.rmse == 0.0);
        CHECK(r.count == (100 - 24) * 4 * r.horizon);
    }
}

TEST_CASE("evaluation matches residuals scored by hand") {
    fixtures::Rng rng(82);
    const TimePoint start = make_time(2017, 6, 5);
    const WeeklyProfile p = fit_ha(series_from(start, 56, 2, [&](TimePoint, std::size_t) {
        return fixtures::uniform(rng, 0, 100);
    }));
    const Dataset test = series_from(start + 3 * kWeek, 10, 2, [&](TimePoint, std::size_t) {
        return fixtures::uniform(rng, 0, 100);
    });
    const std::size_t horizons[] = {2};
    const auto rep = evaluate_ha(p, test, horizons);
    double abs_sum = 0.0, sq_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k + 2 < 10; ++k)
        for (std::size_t lead = 1; lead <= 2; ++lead)
            for (std::size_t i = 0; i < 2; ++i) {
                const double r = p.predict(test.timestamps[k + lead], i) - test.pm25(k + lead, i);
                abs_sum += std::abs(r);
                sq_sum += r * r;
                ++count;
            }
    CHECK(rep.at(2).count == count);
    CHECK(rep.at(2).mae == doctest::Approx(abs_sum / static_cast<double>(count)).epsilon(1e-12));
    CHECK(rep.at(2).rmse == doctest::Approx(std::sqrt(sq_sum / static_cast<double>(count))).epsilon(1e-12));
}
