#ifndef DGNAEA_GEO_GRAPH_HPP
#define DGNAEA_GEO_GRAPH_HPP

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dgnaea/matrix.hpp"

namespace dgnaea {

struct Station {
    std::string id;
    std::string name;
    double lat = 0.0;          // degrees
    double lon = 0.0;          // degrees
    double altitude_km = 0.0;
};

using StationTable = std::vector<Station>;

/// Throws std::invalid_argument on duplicate ids or out-of-range coordinates.
void validate_stations(const StationTable& stations);

/// Reads `station_id,name,lat,lon,altitude_km`.
StationTable read_stations_csv(const std::filesystem::path& path);
void write_stations_csv(const std::filesystem::path& path, const StationTable& stations);

struct PlanarPoint {
    double x_km = 0.0;
    double y_km = 0.0;
};

constexpr double kEarthRadiusKm = 6371.0;

/// Equirectangular projection about the mean latitude/longitude.
std::vector<PlanarPoint> project_stations(const StationTable& stations);

double euclidean_distance(const PlanarPoint& a, const PlanarPoint& b);

/// Angle of the vector src -> dst, atan2 convention, in (-pi, pi].
double bearing(const PlanarPoint& src, const PlanarPoint& dst);

struct Edge {
    std::size_t src = 0;
    std::size_t dst = 0;
    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Static directed topology. Edges are sorted by (src, dst) and pair-symmetric.
struct GraphTopology {
    std::size_t n_nodes = 0;
    std::vector<Edge> edges;

    std::size_t edge_count() const noexcept { return edges.size(); }
    std::vector<std::size_t> sources() const;
    std::vector<std::size_t> targets() const;
    /// Position of (src, dst) in the edge list, or edge_count() if absent.
    std::size_t find(std::size_t src, std::size_t dst) const;
};

struct TopologyThresholds {
    double max_distance_km = 300.0;
    double max_altitude_diff_km = 1.2;
};

/// Keeps (i, j) and (j, i) iff distance <= max_distance_km and
/// |alt_i - alt_j| <= max_altitude_diff_km. An edgeless result is legal and
/// reported on stderr.
GraphTopology build_topology(const StationTable& stations, const TopologyThresholds& thresholds = {});
GraphTopology build_topology(const StationTable& stations, std::span<const PlanarPoint> coords,
                             const TopologyThresholds& thresholds = {});

void write_topology_csv(const std::filesystem::path& path, const GraphTopology& topology,
                        const StationTable& stations, std::span<const PlanarPoint> coords);

/// Raw advection coefficients, T x l, in m/s per km:
///   relu(|wind_src| / d_ij * cos(bearing_ij - wind_dir_src)),
/// with wind direction atan2(v, u) taken at the source station.
Matrix wind_advection_raw(const GraphTopology& topology, std::span<const PlanarPoint> coords, const Matrix& u,
                          const Matrix& v);

struct EdgeSignal {
    Matrix values;       // T x l, each entry in [0, 1]
    double scale = 1.0;  // raw value mapped to 1
};

/// Maximum of raw rows [row_begin, row_end); 1 when that maximum is 0.
double fit_edge_scale(const Matrix& raw, std::size_t row_begin, std::size_t row_end);
/// raw / scale, clipped to [0, 1].
EdgeSignal normalize_edge_signal(const Matrix& raw, double scale);

/// Raw coefficients normalized by the maximum over the first `fit_rows` rows.
EdgeSignal wind_edge_weights(const GraphTopology& topology, std::span<const PlanarPoint> coords, const Matrix& u,
                             const Matrix& v, std::size_t fit_rows);

struct WeightedEdge {
    std::size_t src = 0;
    std::size_t dst = 0;
    double weight = 0.0;
};

/// Sparse form of P (Hadamard) Z: one row per topology edge.
std::vector<WeightedEdge> compose_adjacency(const GraphTopology& topology, std::span<const double> weights);

} // namespace dgnaea

#endif // DGNAEA_GEO_GRAPH_HPP
