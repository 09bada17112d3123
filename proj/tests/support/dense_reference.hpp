#ifndef DGNAEA_TEST_DENSE_REFERENCE_HPP
#define DGNAEA_TEST_DENSE_REFERENCE_HPP

// Independent dense evaluation of the model with nested vectors and scalar
// loops. It materializes the N x N adjacency instead of using edge lists and
// never touches the autodiff tape, so it checks the sparse path from outside.

#include <cmath>
#include <string>
#include <vector>

#include "dgnaea/forecaster.hpp"
#include "dgnaea/matrix.hpp"

namespace dense {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline Mat to_mat(const dgnaea::Matrix& m) {
    Mat out(m.rows(), Vec(m.cols()));
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c)
            out[r][c] = m(r, c);
    return out;
}

inline double sigmoid(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

struct Layer {
    Mat w;  // in x out
    Vec b;

    Vec operator()(const Vec& x) const {
        Vec y = b;
        for (std::size_t o = 0; o < b.size(); ++o)
            for (std::size_t i = 0; i < x.size(); ++i)
                y[o] += x[i] * w[i][o];
        return y;
    }
};

inline Layer layer(const dgnaea::DgnAeaModel& m, const std::string& prefix) {
    return {to_mat(m.params.get(prefix + ".weight")), to_mat(m.params.get(prefix + ".bias"))[0]};
}

inline Vec concat(std::initializer_list<Vec> parts) {
    Vec out;
    for (const Vec& p : parts)
        out.insert(out.end(), p.begin(), p.end());
    return out;
}

inline Vec tanh_vec(Vec v) {
    for (double& x : v)
        x = std::tanh(x);
    return v;
}

/// adjacency[i][j]: edge i -> j exists; weight[i][j]: its scalar edge feature.
struct DenseGraph {
    std::vector<std::vector<bool>> adjacency;
    Mat weight;
};

/// Per node: (sum over in-neighbours j of m_ji) - (sum over out-neighbours j of m_ij),
/// with m_ij = tanh(phi([eps_i, eps_j, z_ij])).
inline Mat net_flow(const Layer& phi, const Mat& eps, const DenseGraph& g) {
    const std::size_t n = eps.size();
    const std::size_t width = phi.b.size();
    Mat out(n, Vec(width, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (!g.adjacency[i][j])
                continue;
            const Vec msg = tanh_vec(phi(concat({eps[i], eps[j], Vec{g.weight[i][j]}})));
            for (std::size_t k = 0; k < width; ++k) {
                out[j][k] += msg[k];
                out[i][k] -= msg[k];
            }
        }
    return out;
}

inline Mat mpnn(const Layer& phi, const Layer& omega, const Mat& eps, const DenseGraph& g) {
    Mat flow = net_flow(phi, eps, g);
    for (Vec& row : flow)
        row = omega(row);
    return flow;
}

struct GruOut {
    Vec q, r, candidate, h;
};

inline GruOut gru(const Layer& wq, const Layer& wr, const Layer& wc, const Vec& zeta, const Vec& eps,
                  const Vec& h_prev) {
    GruOut o;
    const Vec c = concat({zeta, eps});
    const Vec hc = concat({h_prev, c});
    o.q = wq(hc);
    o.r = wr(hc);
    for (double& x : o.q)
        x = sigmoid(x);
    for (double& x : o.r)
        x = sigmoid(x);
    Vec rh(h_prev.size());
    for (std::size_t k = 0; k < rh.size(); ++k)
        rh[k] = o.r[k] * h_prev[k];
    o.candidate = tanh_vec(wc(concat({rh, c})));
    o.h.resize(h_prev.size());
    for (std::size_t k = 0; k < h_prev.size(); ++k)
        o.h[k] = (1.0 - o.q[k]) * h_prev[k] + o.q[k] * o.candidate[k];
    return o;
}

/// One window: x0 (N), features per step (N x 8), wind per step (edge-ordered l values).
/// Returns T x N normalized predictions.
inline Mat forecast(const dgnaea::DgnAeaModel& m, const Vec& x0, const std::vector<Mat>& features,
                    const std::vector<Vec>& wind) {
    using dgnaea::Variant;
    const std::size_t n = m.topology.n_nodes;
    const Variant v = m.config.variant;
    const bool wind_graph = dgnaea::uses_wind_graph(v), aea = dgnaea::uses_adaptive_edges(v);

    auto graph_with = [&](auto edge_value) {
        DenseGraph g{std::vector<std::vector<bool>>(n, std::vector<bool>(n, false)), Mat(n, Vec(n, 0.0))};
        for (std::size_t e = 0; e < m.topology.edge_count(); ++e) {
            const auto& ed = m.topology.edges[e];
            g.adjacency[ed.src][ed.dst] = true;
            g.weight[ed.src][ed.dst] = edge_value(e);
        }
        return g;
    };

    DenseGraph aea_graph;
    if (aea) {
        const auto& z = m.params.get("adaptive_edges");
        aea_graph = graph_with([&](std::size_t e) { return z(e, 0); });
    }
    const Layer q = layer(m, "gru.update"), r = layer(m, "gru.reset"), c = layer(m, "gru.candidate");
    const Layer head = layer(m, "head");

    Vec x = x0;
    Mat h(n, Vec(m.config.hidden, 0.0));
    Mat out;
    for (std::size_t t = 0; t < features.size(); ++t) {
        Mat eps(n);
        for (std::size_t i = 0; i < n; ++i) {
            Vec s = features[t][i];
            if (v == Variant::WoWeather)
                s.assign(8, 0.0);
            eps[i] = concat({Vec{x[i]}, s});
        }
        Mat zeta(n);
        if (v == Variant::Static) {
            const auto g = graph_with([](std::size_t) { return 1.0; });
            const Mat e = mpnn(layer(m, "mpnn_static.phi"), layer(m, "mpnn_static.omega"), eps, g);
            for (std::size_t i = 0; i < n; ++i)
                zeta[i] = tanh_vec(e[i]);
        } else {
            Mat e_wind, e_aea;
            if (wind_graph) {
                const auto g = graph_with([&](std::size_t e) { return wind[t][e]; });
                e_wind = mpnn(layer(m, "mpnn_wind.phi"), layer(m, "mpnn_wind.omega"), eps, g);
            }
            if (aea)
                e_aea = mpnn(layer(m, "mpnn_aea.phi"), layer(m, "mpnn_aea.omega"), eps, aea_graph);
            for (std::size_t i = 0; i < n; ++i) {
                if (wind_graph && aea)
                    zeta[i] = tanh_vec(layer(m, "fusion.psi")(concat({e_wind[i], e_aea[i]})));
                else
                    zeta[i] = tanh_vec(wind_graph ? e_wind[i] : e_aea[i]);
            }
        }
        Vec row(n);
        for (std::size_t i = 0; i < n; ++i) {
            h[i] = gru(q, r, c, zeta[i], eps[i], h[i]).h;
            row[i] = head(h[i])[0];
        }
        x = row;
        out.push_back(row);
    }
    return out;
}

} // namespace dense

#endif // DGNAEA_TEST_DENSE_REFERENCE_HPP
