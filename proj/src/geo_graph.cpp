#include "dgnaea/geo_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <stdexcept>
#include <unordered_set>

#include "dgnaea/csv.hpp"

namespace dgnaea {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
}

void validate_stations(const StationTable& stations) {
    if (stations.empty())
        throw std::invalid_argument("no stations");
    std::unordered_set<std::string> seen;
    for (const Station& s : stations) {
        if (s.id.empty())
            throw std::invalid_argument("station with empty id");
        if (!seen.insert(s.id).second)
            throw std::invalid_argument("duplicate station id '" + s.id + "'");
        if (!(s.lat >= -90.0 && s.lat <= 90.0))
            throw std::invalid_argument("station '" + s.id + "': latitude out of range");
        if (!(s.lon >= -180.0 && s.lon <= 180.0))
            throw std::invalid_argument("station '" + s.id + "': longitude out of range");
        if (!(s.altitude_km >= -0.5) || !std::isfinite(s.altitude_km))
            throw std::invalid_argument("station '" + s.id + "': altitude below -0.5 km");
    }
}

StationTable read_stations_csv(const std::filesystem::path& path) {
    const csv::Table t = csv::read(path);
    csv::require_header(t, {"station_id", "name", "lat", "lon", "altitude_km"}, path.string());
    StationTable out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string where = path.string() + ":" + std::to_string(t.line_numbers[r]);
        out.push_back(Station{row[0], row[1], csv::parse_double(row[2], where), csv::parse_double(row[3], where),
                              csv::parse_double(row[4], where)});
    }
    validate_stations(out);
    return out;
}

void write_stations_csv(const std::filesystem::path& path, const StationTable& stations) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << "station_id,name,lat,lon,altitude_km\n";
    for (const Station& s : stations)
        out << csv::quote(s.id) << ',' << csv::quote(s.name) << ',' << csv::format_double(s.lat) << ','
            << csv::format_double(s.lon) << ',' << csv::format_double(s.altitude_km) << '\n';
}

std::vector<PlanarPoint> project_stations(const StationTable& stations) {
    validate_stations(stations);
    double lat_mean = 0.0, lon_mean = 0.0;
    for (const Station& s : stations) {
        lat_mean += s.lat;
        lon_mean += s.lon;
    }
    lat_mean /= static_cast<double>(stations.size());
    lon_mean /= static_cast<double>(stations.size());
    const double coslat = std::cos(lat_mean * kDegToRad);

    std::vector<PlanarPoint> out;
    out.reserve(stations.size());
    for (const Station& s : stations)
        out.push_back({kEarthRadiusKm * (s.lon - lon_mean) * kDegToRad * coslat,
                       kEarthRadiusKm * (s.lat - lat_mean) * kDegToRad});
    return out;
}

double euclidean_distance(const PlanarPoint& a, const PlanarPoint& b) {
    const double dx = a.x_km - b.x_km;
    const double dy = a.y_km - b.y_km;
    return std::sqrt(dx * dx + dy * dy);
}

double bearing(const PlanarPoint& src, const PlanarPoint& dst) {
    const double dx = dst.x_km - src.x_km;
    const double dy = dst.y_km - src.y_km;
    if (dx == 0.0 && dy == 0.0)
        throw std::invalid_argument("zero-length edge");
    return std::atan2(dy, dx);
}

std::vector<std::size_t> GraphTopology::sources() const {
    std::vector<std::size_t> out;
    out.reserve(edges.size());
    for (const Edge& e : edges)
        out.push_back(e.src);
    return out;
}

std::vector<std::size_t> GraphTopology::targets() const {
    std::vector<std::size_t> out;
    out.reserve(edges.size());
    for (const Edge& e : edges)
        out.push_back(e.dst);
    return out;
}

std::size_t GraphTopology::find(std::size_t src, std::size_t dst) const {
    const Edge key{src, dst};
    auto it = std::lower_bound(edges.begin(), edges.end(), key, [](const Edge& a, const Edge& b) {
        return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    if (it != edges.end() && *it == key)
        return static_cast<std::size_t>(it - edges.begin());
    return edges.size();
}

GraphTopology build_topology(const StationTable& stations, const TopologyThresholds& thresholds) {
    const auto coords = project_stations(stations);
    return build_topology(stations, coords, thresholds);
}

GraphTopology build_topology(const StationTable& stations, std::span<const PlanarPoint> coords,
                             const TopologyThresholds& thresholds) {
    validate_stations(stations);
    if (stations.size() < 2)
        throw std::invalid_argument("graph needs at least 2 stations, got " + std::to_string(stations.size()));
    if (coords.size() != stations.size())
        throw std::invalid_argument("coordinates do not match station table");

    GraphTopology topo;
    topo.n_nodes = stations.size();
    // Row-major double loop emits edges already sorted by (src, dst).
    for (std::size_t i = 0; i < stations.size(); ++i) {
        for (std::size_t j = 0; j < stations.size(); ++j) {
            if (i == j)
                continue;
            const double d = euclidean_distance(coords[i], coords[j]);
            const double da = std::abs(stations[i].altitude_km - stations[j].altitude_km);
            if (d <= thresholds.max_distance_km && da <= thresholds.max_altitude_diff_km)
                topo.edges.push_back({i, j});
        }
    }
    if (topo.edges.empty())
        std::cerr << "warning: topology has no edges; the model reduces to per-station recurrence\n";
    return topo;
}

void write_topology_csv(const std::filesystem::path& path, const GraphTopology& topology,
                        const StationTable& stations, std::span<const PlanarPoint> coords) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << "src_id,dst_id,distance_km\n";
    for (const Edge& e : topology.edges)
        out << csv::quote(stations[e.src].id) << ',' << csv::quote(stations[e.dst].id) << ','
            << csv::format_double(euclidean_distance(coords[e.src], coords[e.dst])) << '\n';
}

Matrix wind_advection_raw(const GraphTopology& topology, std::span<const PlanarPoint> coords, const Matrix& u,
                          const Matrix& v) {
    if (!u.same_shape(v))
        throw std::invalid_argument("u and v wind components differ in shape");
    if (u.cols() != topology.n_nodes || coords.size() != topology.n_nodes)
        throw std::invalid_argument("wind fields are not aligned with the topology nodes");

    // |w| / d * cos(bearing - wind_dir) written as (w . (dst - src)) / d^2,
    // which is exactly 0 for perpendicular wind.
    const std::size_t l = topology.edge_count();
    std::vector<double> dx(l), dy(l), inv_d2(l);
    for (std::size_t e = 0; e < l; ++e) {
        const Edge& ed = topology.edges[e];
        bearing(coords[ed.src], coords[ed.dst]);  // rejects coincident stations
        dx[e] = coords[ed.dst].x_km - coords[ed.src].x_km;
        dy[e] = coords[ed.dst].y_km - coords[ed.src].y_km;
        inv_d2[e] = 1.0 / (dx[e] * dx[e] + dy[e] * dy[e]);
    }

    Matrix raw(u.rows(), l);
    for (std::size_t t = 0; t < u.rows(); ++t) {
        for (std::size_t e = 0; e < l; ++e) {
            const std::size_t i = topology.edges[e].src;
            const double a = (u(t, i) * dx[e] + v(t, i) * dy[e]) * inv_d2[e];
            raw(t, e) = a > 0.0 ? a : 0.0;
        }
    }
    return raw;
}

double fit_edge_scale(const Matrix& raw, std::size_t row_begin, std::size_t row_end) {
    row_end = std::min(row_end, raw.rows());
    double m = 0.0;
    for (std::size_t t = row_begin; t < row_end; ++t)
        for (double x : raw.row(t))
            m = std::max(m, x);
    return m > 0.0 ? m : 1.0;
}

EdgeSignal normalize_edge_signal(const Matrix& raw, double scale) {
    if (!(scale > 0.0))
        throw std::invalid_argument("edge signal scale must be positive");
    EdgeSignal s{raw, scale};
    for (double& x : s.values.values())
        x = std::clamp(x / scale, 0.0, 1.0);
    return s;
}

EdgeSignal wind_edge_weights(const GraphTopology& topology, std::span<const PlanarPoint> coords, const Matrix& u,
                             const Matrix& v, std::size_t fit_rows) {
    const Matrix raw = wind_advection_raw(topology, coords, u, v);
    return normalize_edge_signal(raw, fit_edge_scale(raw, 0, fit_rows));
}

std::vector<WeightedEdge> compose_adjacency(const GraphTopology& topology, std::span<const double> weights) {
    if (weights.size() != topology.edge_count())
        throw std::invalid_argument("weights length " + std::to_string(weights.size()) + " does not match " +
                                    std::to_string(topology.edge_count()) + " edges");
    std::vector<WeightedEdge> out;
    out.reserve(weights.size());
    for (std::size_t e = 0; e < weights.size(); ++e)
        out.push_back({topology.edges[e].src, topology.edges[e].dst, weights[e]});
    return out;
}

} // namespace dgnaea
