#include "dgnaea/spatial.hpp"

#include <stdexcept>
#include <string>

namespace dgnaea::spatial {

ad::Value apply(const Linear& layer, const ad::Value& x) {
    return ad::add_row(ad::matmul(x, layer.weight), layer.bias);
}

GraphIndex GraphIndex::build(const GraphTopology& topology, std::size_t batch) {
    const std::size_t n = topology.n_nodes;
    const std::size_t l = topology.edge_count();
    std::vector<std::size_t> src, dst;
    src.reserve(batch * l);
    dst.reserve(batch * l);
    for (std::size_t b = 0; b < batch; ++b) {
        for (const Edge& e : topology.edges) {
            src.push_back(b * n + e.src);
            dst.push_back(b * n + e.dst);
        }
    }
    GraphIndex g;
    g.n_nodes = batch * n;
    g.n_edges = batch * l;
    g.src = ad::RowIndex::make(std::move(src), g.n_nodes);
    g.dst = ad::RowIndex::make(std::move(dst), g.n_nodes);
    return g;
}

ad::Value node_embed(const ad::Value& x_prev, const ad::Value& features) {
    if (features.cols() != kWeatherFeatures)
        throw std::invalid_argument("node features must have " + std::to_string(kWeatherFeatures) +
                                    " columns, got " + std::to_string(features.cols()));
    if (x_prev.cols() != 1)
        throw std::invalid_argument("previous concentration must be a column vector");
    return ad::concat({x_prev, features});
}

ad::Value edge_messages(const MpnnWeights& w, const ad::Value& embed, const ad::Value& edge_weight,
                        const GraphIndex& graph) {
    if (edge_weight.rows() != graph.n_edges || edge_weight.cols() != kEdgeFeatures)
        throw std::invalid_argument("edge weights have " + std::to_string(edge_weight.rows()) + " rows, graph has " +
                                    std::to_string(graph.n_edges) + " edges");
    const ad::Value from = ad::gather_rows(embed, graph.src);
    const ad::Value to = ad::gather_rows(embed, graph.dst);
    return ad::tanh(apply(w.phi, ad::concat({from, to, edge_weight})));
}

ad::Value net_flow(const ad::Value& messages, const GraphIndex& graph) {
    return ad::sub(ad::scatter_add_rows(messages, graph.dst), ad::scatter_add_rows(messages, graph.src));
}

ad::Value aggregate_directed(const MpnnWeights& w, const ad::Value& messages, const GraphIndex& graph) {
    return apply(w.omega, net_flow(messages, graph));
}

ad::Value fuse_graphs(const FusionWeights& w, const ad::Value& e_wind, const ad::Value& e_aea) {
    if (e_wind.cols() != e_aea.cols() || e_wind.rows() != e_aea.rows())
        throw std::invalid_argument("fusion inputs differ in shape");
    return ad::tanh(apply(w.psi, ad::concat({e_wind, e_aea})));
}

ad::Value fuse_single(const ad::Value& e) {
    return ad::tanh(e);
}

} // namespace dgnaea::spatial
