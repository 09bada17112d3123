#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dgnaea/training.hpp"
#include "support/fixtures.hpp"

using namespace dgnaea;
using fixtures::random_matrix;

namespace {

struct SmallProblem {
    DgnAeaModel model;
    PreparedSplit train, val, test;
};

SmallProblem small_problem(Variant variant, std::size_t steps = 160) {
    SynthConfig sc;
    sc.n_stations = 5;
    sc.n_steps = steps;
    sc.burn_in = 20;
    sc.seed = 3;
    const StationTable stations = synth_stations(sc.n_stations, sc.seed);
    const auto coords = project_stations(stations);
    const GraphTopology topo = build_topology(stations, coords, {400.0, 1.2});
    const SynthResult synth = synth_advection(stations, topo, coords, sc);
    const SplitData parts = split(synth.dataset, ratio_split(synth.dataset, 0.6, 0.2));

    ModelConfig mc;
    mc.variant = variant;
    mc.edge_hidden = 4;
    mc.hidden = 4;
    mc.horizon = 3;
    SmallProblem p;
    p.model = init_model(mc, stations, topo);
    p.model.norm = fit_model_normalizer(parts.train, topo);
    p.train = prepare_split(p.model, parts.train);
    p.val = prepare_split(p.model, parts.val);
    p.test = prepare_split(p.model, parts.test);
    return p;
}

} // namespace

TEST_CASE("mse fixtures") {
    CHECK(mse_loss(Matrix::from_rows({{1, 2}, {3, 4}}), Matrix::from_rows({{1, 2}, {3, 4}})) == 0.0);
    CHECK(mse_loss(Matrix::from_rows({{1, 2}, {3, 4}}), Matrix::from_rows({{0, 3}, {2, 5}})) == 1.0);
    CHECK(mse_loss(Matrix::from_rows({{1, 2}}), Matrix::from_rows({{0, -1}})) == 5.0);
    CHECK_THROWS_AS(mse_loss(Matrix(2, 2), Matrix(2, 3)), std::invalid_argument);
}

TEST_CASE("mse equals a two-loop oracle and the tape form agrees") {
    fixtures::Rng rng(61);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t t_steps = fixtures::uniform_index(rng, 1, 6), n = fixtures::uniform_index(rng, 1, 9);
        const Matrix pred = random_matrix(t_steps, n, rng, -5, 5), target = random_matrix(t_steps, n, rng, -5, 5);
        double oracle = 0.0;
        for (std::size_t t = 0; t < t_steps; ++t) {
            double inner = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                inner += (pred(t, i) - target(t, i)) * (pred(t, i) - target(t, i));
            oracle += inner / static_cast<double>(n);
        }
        oracle /= static_cast<double>(t_steps);
        CHECK(std::abs(mse_loss(pred, target) - oracle) <= 1e-12);

        ad::Tape tape;
        std::vector<ad::Value> preds;
        std::vector<Matrix> targets;
        for (std::size_t t = 0; t < t_steps; ++t) {
            Matrix p(n, 1), y(n, 1);
            for (std::size_t i = 0; i < n; ++i) {
                p(i, 0) = pred(t, i);
                y(i, 0) = target(t, i);
            }
            preds.push_back(tape.constant(p));
            targets.push_back(y);
        }
        CHECK(std::abs(mse_loss(preds, targets).scalar() - oracle) <= 1e-12);
    }
}

TEST_CASE("rmsprop first step on a unit gradient") {
    TrainConfig c;  // lr 5e-4, rho 0.9, wd 5e-4
    std::vector<Matrix> p = {Matrix(1, 1, 0.0)};
    const Matrix g[] = {Matrix(1, 1, 1.0)};
    OptimizerState s;
    rmsprop_step(p, g, s, c);
    // v = 0.1, step = 5e-4 / (sqrt(0.1) + 1e-8)
    CHECK(p[0](0, 0) == doctest::Approx(-1.5811e-3).epsilon(1e-4));
    CHECK(s.step == 1);
    CHECK(s.sq_avg[0](0, 0) == doctest::Approx(0.1));
}

TEST_CASE("rmsprop with zero gradient only applies weight decay") {
    TrainConfig c;
    std::vector<Matrix> p = {Matrix(1, 1, 1.0)};
    const Matrix g[] = {Matrix(1, 1, 0.0)};
    OptimizerState s;
    rmsprop_step(p, g, s, c);
    CHECK(p[0](0, 0) == doctest::Approx(0.99999975).epsilon(1e-12));
}

TEST_CASE("rmsprop rejects mismatched gradients") {
    TrainConfig c;
    std::vector<Matrix> p = {Matrix(2, 1)};
    OptimizerState s;
    const Matrix wrong[] = {Matrix(1, 2)};
    CHECK_THROWS_AS(rmsprop_step(p, wrong, s, c), std::invalid_argument);
    CHECK_THROWS_AS(rmsprop_step(p, {}, s, c), std::invalid_argument);
}

TEST_CASE("early stopping on a constant loss stops after patience + 1 epochs") {
    EarlyStopping es(10);
    std::size_t epochs = 0;
    while (!es.should_stop() && epochs < 50) {
        es.update(1.0);
        ++epochs;
    }
    CHECK(epochs == 11);
    CHECK(es.best_epoch() == 1);
}

TEST_CASE("early stopping never triggers on a strictly improving loss") {
    EarlyStopping es(10);
    std::size_t epochs = 0;
    while (!es.should_stop() && epochs < 50) {
        CHECK(es.update(1.0 / static_cast<double>(epochs + 1)));
        ++epochs;
    }
    CHECK(epochs == 50);
    CHECK(es.best_epoch() == 50);
}

TEST_CASE("early stopping keeps the best epoch across a plateau") {
    EarlyStopping es(3);
    for (double v : {5.0, 4.0, 4.0, 4.5, 3.0, 3.5, 3.5, 3.5})
        es.update(v);
    CHECK(es.best() == 3.0);
    CHECK(es.best_epoch() == 5);
    CHECK(es.should_stop());
}

TEST_CASE("metrics fixture and pooled ordering") {
    const double pred[] = {1.0, 2.0, 3.0}, truth[] = {1.0, 1.0, 1.0};
    const auto m = pooled_metrics(pred, truth);
    CHECK(m.mae == doctest::Approx(1.0));
    CHECK(m.rmse == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK(m.count == 3);
}

TEST_CASE("RMSE is never below MAE and both ignore residual order") {
    fixtures::Rng rng(62);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = fixtures::uniform_index(rng, 1, 40);
        std::vector<double> pred(n), truth(n);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = fixtures::uniform(rng, 0, 200);
            truth[i] = fixtures::uniform(rng, 0, 200);
        }
        const auto a = pooled_metrics(pred, truth);
        CHECK(a.rmse >= a.mae - 1e-12);
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i)
            order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<double> p2(n), t2(n);
        for (std::size_t i = 0; i < n; ++i) {
            p2[i] = pred[order[i]];
            t2[i] = truth[order[i]];
        }
        const auto b = pooled_metrics(p2, t2);
        CHECK(b.mae == doctest::Approx(a.mae).epsilon(1e-12));
        CHECK(b.rmse == doctest::Approx(a.rmse).epsilon(1e-12));
    }
}

TEST_CASE("horizon metrics pool every lead up to the horizon") {
    MetricsAccumulator acc({1, 2});
    acc.add(1, 1.0);
    acc.add(2, -3.0);
    const auto rep = acc.report();
    CHECK(rep.at(1).mae == 1.0);
    CHECK(rep.at(2).mae == 2.0);
    CHECK(rep.at(2).rmse == doctest::Approx(std::sqrt(5.0)));
    CHECK(rep.at(2).count == 2);
    CHECK_THROWS_AS(rep.at(3), std::out_of_range);
    CHECK_THROWS_AS(acc.add(3, 0.0), std::out_of_range);
}

TEST_CASE("batches align x0 at the window start with targets one step ahead") {
    auto p = small_problem(Variant::OnlyWind, 60);
    const std::size_t starts[] = {4, 10};
    const auto wb = make_batch(p.model, p.train, starts, 3);
    const std::size_t n = 5, l = p.model.topology.edge_count();
    REQUIRE(wb.targets.size() == 3);
    for (std::size_t w = 0; w < 2; ++w)
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(wb.inputs.x0(w * n + i, 0) == p.train.pm25(starts[w], i));
            for (std::size_t t = 0; t < 3; ++t) {
                CHECK(wb.targets[t](w * n + i, 0) == p.train.pm25(starts[w] + t + 1, i));
                CHECK(wb.inputs.features[t](w * n + i, 0) ==
                      p.train.features((starts[w] + t + 1) * n + i, 0));
            }
        }
    for (std::size_t e = 0; e < l; ++e)
        CHECK(wb.inputs.wind[0](l + e, 0) == p.train.wind(11, e));
    const std::size_t past_end[] = {p.train.steps() - 3};
    CHECK_THROWS_AS(make_batch(p.model, p.train, past_end, 3), std::out_of_range);
}

TEST_CASE("wind edge signal is clipped into [0, 1] with the scale fitted on train") {
    auto p = small_problem(Variant::AeaWind);
    double train_max = 0.0;
    for (double x : p.train.wind.values()) {
        CHECK((x >= 0.0 && x <= 1.0));
        train_max = std::max(train_max, x);
    }
    CHECK(train_max == 1.0);
    for (double x : p.test.wind.values())
        CHECK((x >= 0.0 && x <= 1.0));
}

TEST_CASE("training is deterministic and reduces the training loss") {
    auto p = small_problem(Variant::AeaWind);
    TrainConfig c;
    c.max_epochs = 5;
    c.batch_size = 16;
    c.lr = 5e-3;
    c.seed = 1;
    std::size_t callbacks = 0;
    const auto a = train(p.model, p.train, p.val, c, [&](const EpochRecord&) { ++callbacks; });
    const auto b = train(p.model, p.train, p.val, c);
    CHECK(callbacks == 5);
    REQUIRE(a.history.size() == 5);
    CHECK(a.model.params == b.model.params);
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(a.history[k].train_mse == b.history[k].train_mse);
        CHECK(a.history[k].val_mse == b.history[k].val_mse);
    }
    CHECK(a.history[4].train_mse < a.history[0].train_mse);

    c.seed = 2;
    const auto other = train(p.model, p.train, p.val, c);
    CHECK(!(other.model.params == a.model.params));
}

TEST_CASE("the returned model is the best-validation checkpoint") {
    auto p = small_problem(Variant::OnlyWind);
    TrainConfig c;
    c.max_epochs = 6;
    c.batch_size = 16;
    c.lr = 2e-2;
    const auto r = train(p.model, p.train, p.val, c);
    double best = r.history[0].val_mse;
    std::size_t best_epoch = 1;
    for (const auto& rec : r.history)
        if (rec.val_mse < best) {
            best = rec.val_mse;
            best_epoch = rec.epoch;
        }
    CHECK(r.best_epoch == best_epoch);
    CHECK(r.best_val_mse == best);
    CHECK(validation_loss(r.model, p.val, 3) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("training rejects empty or too-short splits and bad settings") {
    auto p = small_problem(Variant::OnlyWind, 60);
    TrainConfig c;
    c.max_epochs = 1;
    PreparedSplit empty;
    CHECK_THROWS_AS(train(p.model, empty, p.val, c), std::invalid_argument);
    CHECK_THROWS_AS(train(p.model, p.train, empty, c), std::invalid_argument);
    c.lr = 0.0;
    CHECK_THROWS_AS(train(p.model, p.train, p.val, c), std::invalid_argument);
    c.lr = 1e-3;
    c.rho = 1.0;
    CHECK_THROWS_AS(train(p.model, p.train, p.val, c), std::invalid_argument);
}

TEST_CASE("divergent training raises a numerical error") {
    auto p = small_problem(Variant::OnlyWind, 60);
    p.model.params.get("head.bias")(0, 0) = std::numeric_limits<double>::quiet_NaN();
    TrainConfig c;
    c.max_epochs = 1;
    CHECK_THROWS_AS(train(p.model, p.train, p.val, c), NumericalError);
}

TEST_CASE("evaluation reports every requested horizon and checks split length") {
    auto p = small_problem(Variant::AeaWind);
    const auto rep = evaluate(p.model, p.test);
    REQUIRE(rep.rows.size() == 4);
    for (const auto& r : rep.rows) {
        CHECK(r.rmse >= r.mae);
        CHECK(r.count == (p.test.steps() - 24) * 5 * r.horizon);
    }
    const std::size_t h[] = {24};
    SmallProblem short_p = small_problem(Variant::AeaWind, 100);
    CHECK_THROWS_AS(evaluate(short_p.model, short_p.test, h), std::invalid_argument);
}
