#ifndef DGNAEA_SPATIAL_HPP
#define DGNAEA_SPATIAL_HPP

// Message passing block with directed in/out aggregation, and the layer that
// fuses the wind-graph and adaptive-graph embeddings.
//
// Shapes (B = batch of graphs stacked block-diagonally):
//   node embedding   eps   : (B*N) x 9        [x_prev, 8 weather features]
//   edge weight      z     : (B*l) x 1
//   messages         m     : (B*l) x h_e      m_e = tanh([eps_src, eps_dst, z_e] W_phi + b_phi)
//   node embedding   e     : (B*N) x h_e      e_i = (inflow_i - outflow_i) W_omega + b_omega

#include <cstddef>
#include <memory>

#include "dgnaea/autodiff.hpp"
#include "dgnaea/geo_graph.hpp"

namespace dgnaea::spatial {

inline constexpr std::size_t kWeatherFeatures = 8;
inline constexpr std::size_t kEmbedWidth = 1 + kWeatherFeatures;
inline constexpr std::size_t kEdgeFeatures = 1;
inline constexpr std::size_t kMessageInput = 2 * kEmbedWidth + kEdgeFeatures;

struct Linear {
    ad::Value weight;  // in x out
    ad::Value bias;    // 1 x out
};

ad::Value apply(const Linear& layer, const ad::Value& x);

struct MpnnWeights {
    Linear phi;    // kMessageInput -> h_e, tanh
    Linear omega;  // h_e -> h_e, identity
};

struct FusionWeights {
    Linear psi;  // 2 h_e -> h_e, tanh
};

/// Edge endpoints of B stacked copies of a topology.
struct GraphIndex {
    std::size_t n_nodes = 0;  // B * N
    std::size_t n_edges = 0;  // B * l
    std::shared_ptr<const ad::RowIndex> src;
    std::shared_ptr<const ad::RowIndex> dst;

    static GraphIndex build(const GraphTopology& topology, std::size_t batch = 1);
};

/// [x_prev, s_t] column-wise. Throws unless s_t has 8 columns.
ad::Value node_embed(const ad::Value& x_prev, const ad::Value& features);

/// One message per directed edge. Throws when z is not (n_edges x 1).
ad::Value edge_messages(const MpnnWeights& w, const ad::Value& embed, const ad::Value& edge_weight,
                        const GraphIndex& graph);

/// sum of messages arriving at each node minus those leaving it (before omega).
ad::Value net_flow(const ad::Value& messages, const GraphIndex& graph);

/// omega(net_flow(messages)).
ad::Value aggregate_directed(const MpnnWeights& w, const ad::Value& messages, const GraphIndex& graph);

/// tanh([e_wind, e_aea] W_psi + b_psi). Throws on width mismatch.
ad::Value fuse_graphs(const FusionWeights& w, const ad::Value& e_wind, const ad::Value& e_aea);

/// Single-graph variants keep the fusion activation but drop its parameters.
ad::Value fuse_single(const ad::Value& e);

} // namespace dgnaea::spatial

#endif // DGNAEA_SPATIAL_HPP
