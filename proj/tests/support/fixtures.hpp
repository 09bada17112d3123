#ifndef DGNAEA_TEST_FIXTURES_HPP
#define DGNAEA_TEST_FIXTURES_HPP

// Hand-rolled generators shared by the unit tests.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <unistd.h>
#include <string>

#include "dgnaea/forecaster.hpp"
#include "dgnaea/geo_graph.hpp"
#include "dgnaea/matrix.hpp"

namespace fixtures {

using dgnaea::Matrix;
using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo = -1.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m(r, c);
    for (double& x : m.values())
        x = uniform(rng, lo, hi);
    return m;
}

/// Pair-symmetric random graph; each unordered pair joined with probability p.
inline dgnaea::GraphTopology random_topology(std::size_t n, Rng& rng, double p = 0.5) {
    dgnaea::GraphTopology t;
    t.n_nodes = n;
    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (uniform(rng, 0.0, 1.0) < p)
                adj[i][j] = adj[j][i] = true;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (adj[i][j])
                t.edges.push_back({i, j});
    return t;
}

inline dgnaea::StationTable make_stations(std::size_t n) {
    dgnaea::StationTable s;
    for (std::size_t i = 0; i < n; ++i)
        s.push_back({"N" + std::to_string(i), "node " + std::to_string(i), 30.0 + 0.5 * static_cast<double>(i % 4),
                     115.0 + 0.5 * static_cast<double>(i / 4), 0.0});
    return s;
}

/// Freshly initialized model with biases randomized too, so no term is trivially zero.
inline dgnaea::DgnAeaModel random_model(dgnaea::Variant variant, const dgnaea::GraphTopology& topo,
                                        std::size_t edge_hidden, std::size_t hidden, std::uint64_t seed,
                                        double bias_scale = 0.3) {
    dgnaea::ModelConfig c;
    c.variant = variant;
    c.edge_hidden = edge_hidden;
    c.hidden = hidden;
    c.seed = seed;
    auto m = dgnaea::init_model(c, make_stations(topo.n_nodes), topo);
    Rng rng(seed * 7919 + 17);
    for (std::size_t i = 0; i < m.params.size(); ++i)
        if (m.params.name(i).ends_with(".bias"))
            for (double& x : m.params.at(i).values())
                x = uniform(rng, -bias_scale, bias_scale);
    if (m.has_adaptive_edges())
        for (double& x : m.params.get("adaptive_edges").values())
            x = uniform(rng, -1.0, 1.0);
    return m;
}

/// Random normalized inputs for `batch` windows.
inline dgnaea::ForecastBatch random_batch(const dgnaea::DgnAeaModel& m, std::size_t batch, std::size_t horizon,
                                          Rng& rng) {
    const std::size_t n = m.topology.n_nodes, l = m.topology.edge_count();
    dgnaea::ForecastBatch b;
    b.batch = batch;
    b.x0 = random_matrix(batch * n, 1, rng);
    for (std::size_t t = 0; t < horizon; ++t) {
        b.features.push_back(random_matrix(batch * n, 8, rng));
        if (dgnaea::uses_wind_graph(m.config.variant))
            b.wind.push_back(random_matrix(batch * l, 1, rng, 0.0, 1.0));
    }
    return b;
}

/// Unique scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("dgnaea_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

} // namespace fixtures

#endif // DGNAEA_TEST_FIXTURES_HPP
