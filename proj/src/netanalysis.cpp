#include "dgnaea/netanalysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>
#include <utility>

#include "dgnaea/csv.hpp"

namespace dgnaea {

std::vector<DegreeStats> degree_centrality(std::span<const WeightedEdge> edges, std::size_t n) {
    if (n < 2)
        throw std::invalid_argument("degree centrality needs at least 2 nodes");
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& e : edges) {
        if (e.src >= n || e.dst >= n)
            throw std::out_of_range("edge endpoint out of range");
        if (e.src != e.dst)
            pairs.emplace(std::min(e.src, e.dst), std::max(e.src, e.dst));
    }
    std::vector<DegreeStats> out(n);
    for (const auto& [a, b] : pairs) {
        ++out[a].degree;
        ++out[b].degree;
    }
    for (auto& d : out)
        d.centrality = static_cast<double>(d.degree) / static_cast<double>(n - 1);
    return out;
}

std::vector<NodeNetworkStats> strength_ranking(std::span<const WeightedEdge> edges, const StationTable& stations) {
    const std::size_t n = stations.size();
    const auto degrees = degree_centrality(edges, n);
    std::vector<NodeNetworkStats> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].node = i;
        out[i].station_id = stations[i].id;
        out[i].degree = degrees[i].degree;
        out[i].centrality = degrees[i].centrality;
    }
    for (const auto& e : edges) {
        out[e.src].out_strength += std::abs(e.weight);
        out[e.dst].in_strength += std::abs(e.weight);
    }
    for (auto& s : out)
        s.balance = s.out_strength - s.in_strength;
    std::sort(out.begin(), out.end(), [](const NodeNetworkStats& a, const NodeNetworkStats& b) {
        if (a.balance != b.balance)
            return a.balance > b.balance;
        return a.station_id < b.station_id;
    });
    return out;
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> rank(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]])
            ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            rank[order[k]] = r;
        i = j + 1;
    }
    return rank;
}

} // namespace

std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw std::invalid_argument("spearman needs equal-length series");
    if (a.size() < 3)
        return std::nullopt;
    const auto ra = average_ranks(a), rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0)
        return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

WeightDegreeReport weight_degree_report(std::span<const NodeNetworkStats> stats) {
    std::vector<double> strength, degree, centrality;
    for (const auto& s : stats) {
        strength.push_back(s.total_strength());
        degree.push_back(static_cast<double>(s.degree));
        centrality.push_back(s.centrality);
    }
    return {spearman(strength, degree), spearman(strength, centrality)};
}

void write_network_csv(const std::filesystem::path& path, std::span<const NodeNetworkStats> stats) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << "station_id,degree,centrality,in_strength,out_strength,balance\n";
    for (const auto& s : stats)
        out << csv::quote(s.station_id) << ',' << s.degree << ',' << csv::format_double(s.centrality) << ','
            << csv::format_double(s.in_strength) << ',' << csv::format_double(s.out_strength) << ','
            << csv::format_double(s.balance) << '\n';
}

void write_network_summary(const std::filesystem::path& path, std::span<const NodeNetworkStats> stats,
                           const WeightDegreeReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    double in = 0.0, outs = 0.0;
    for (const auto& s : stats) {
        in += s.in_strength;
        outs += s.out_strength;
    }
    auto corr = [](const std::optional<double>& c) { return c ? csv::format_double(*c) : std::string("undefined"); };
    out << "nodes = " << stats.size() << '\n';
    out << "total_in_strength = " << csv::format_double(in) << '\n';
    out << "total_out_strength = " << csv::format_double(outs) << '\n';
    out << "spearman_strength_degree = " << corr(report.strength_vs_degree) << '\n';
    out << "spearman_strength_centrality = " << corr(report.strength_vs_centrality) << '\n';
    if (!stats.empty()) {
        out << "top_balance_station = " << stats.front().station_id << '\n';
        out << "bottom_balance_station = " << stats.back().station_id << '\n';
    }
}

} // namespace dgnaea
