#ifndef DGNAEA_NETANALYSIS_HPP
#define DGNAEA_NETANALYSIS_HPP

// Degree centrality and in/out strength of a learned edge-weight table.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dgnaea/geo_graph.hpp"

namespace dgnaea {

struct DegreeStats {
    std::size_t degree = 0;   // distinct neighbours
    double centrality = 0.0;  // degree / (n - 1)
};

/// Neighbours are counted once whatever the edge direction. Throws when n < 2.
std::vector<DegreeStats> degree_centrality(std::span<const WeightedEdge> edges, std::size_t n);

struct NodeNetworkStats {
    std::size_t node = 0;
    std::string station_id;
    std::size_t degree = 0;
    double centrality = 0.0;
    double in_strength = 0.0;   // sum of |w| over incoming edges
    double out_strength = 0.0;  // sum of |w| over outgoing edges
    double balance = 0.0;       // out - in

    double total_strength() const { return in_strength + out_strength; }
};

/// One row per station, sorted by balance descending, ties by station id.
std::vector<NodeNetworkStats> strength_ranking(std::span<const WeightedEdge> edges, const StationTable& stations);

/// Spearman rank correlation with average ranks for ties; nullopt when
/// either series is constant or shorter than 3.
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);

struct WeightDegreeReport {
    std::optional<double> strength_vs_degree;
    std::optional<double> strength_vs_centrality;
};

WeightDegreeReport weight_degree_report(std::span<const NodeNetworkStats> stats);

/// `station_id,degree,centrality,in_strength,out_strength,balance`.
void write_network_csv(const std::filesystem::path& path, std::span<const NodeNetworkStats> stats);
/// Key-value summary of the correlations and strength totals.
void write_network_summary(const std::filesystem::path& path, std::span<const NodeNetworkStats> stats,
                           const WeightDegreeReport& report);

} // namespace dgnaea

#endif // DGNAEA_NETANALYSIS_HPP
