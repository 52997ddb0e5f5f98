#include "raterlab/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "json.hpp"
#include "raterlab/error.hpp"

namespace raterlab {

namespace {

double dist(const std::array<double, 2>& a, const std::array<double, 2>& b) {
    return std::hypot(a[0] - b[0], a[1] - b[1]);
}

std::vector<std::array<double, 2>> sorted_coords(const Cluster& c) {
    std::vector<std::array<double, 2>> v;
    for (const auto& m : c.members) v.push_back(m.coords);
    std::sort(v.begin(), v.end());
    return v;
}

}  // namespace

std::vector<StylePoint> style_points(const StyleTable& table) {
    std::vector<StylePoint> pts;
    for (const auto& r : table.rows) pts.push_back({r.rater_id, r.center_id, {r.bias, r.consistency}});
    return pts;
}

std::optional<double> davies_bouldin(const std::vector<Cluster>& clusters) {
    const std::size_t k = clusters.size();
    if (k < 2) return std::nullopt;
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        double worst = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            if (i == j) continue;
            const double m = dist(clusters[i].centroid, clusters[j].centroid);
            if (m == 0.0) return std::nullopt;
            worst = std::max(worst, (clusters[i].scatter + clusters[j].scatter) / m);
        }
        total += worst;
    }
    return total / static_cast<double>(k);
}

ClusterReport cluster_report(const std::vector<StylePoint>& points) {
    std::map<std::string, Cluster> groups;
    for (const auto& p : points) {
        if (!std::isfinite(p.coords[0]) || !std::isfinite(p.coords[1]))
            throw Error("cluster_report: non-finite coordinates for rater " + p.rater_id);
        auto& c = groups[p.center_id];
        c.center_id = p.center_id;
        c.members.push_back(p);
    }
    ClusterReport report;
    for (auto& [id, c] : groups) {
        std::array<double, 2> sum{0.0, 0.0};
        for (const auto& m : c.members) {
            sum[0] += m.coords[0];
            sum[1] += m.coords[1];
        }
        const double n = static_cast<double>(c.members.size());
        c.centroid = {sum[0] / n, sum[1] / n};
        double s = 0.0;
        for (const auto& m : c.members) {
            const double d = dist(m.coords, c.centroid);
            c.radius = std::max(c.radius, d);
            s += d;
        }
        c.scatter = s / n;
        if (c.members.size() == 1) c.radius = c.scatter = 0.0;
        report.clusters.push_back(c);
    }
    for (std::size_t i = 0; i < report.clusters.size(); ++i)
        for (std::size_t j = i + 1; j < report.clusters.size(); ++j) {
            if (sorted_coords(report.clusters[i]) == sorted_coords(report.clusters[j]))
                throw Error("cluster_report: clusters " + report.clusters[i].center_id + " and " +
                            report.clusters[j].center_id + " hold identical members");
            report.distances.push_back({report.clusters[i].center_id, report.clusters[j].center_id,
                                        dist(report.clusters[i].centroid, report.clusters[j].centroid)});
        }
    report.db_index = davies_bouldin(report.clusters);
    if (report.clusters.size() < 2)
        report.note = "fewer than two clusters: Davies-Bouldin index undefined";
    else if (!report.db_index)
        report.note = "coincident centroids: Davies-Bouldin index undefined";
    return report;
}

std::string cluster_report_json(const ClusterReport& report, const std::string& metadata_json) {
    using nlohmann::json;
    json j;
    j["metadata"] = json::parse(metadata_json);
    j["n_clusters"] = report.clusters.size();
    j["clusters"] = json::array();
    for (const auto& c : report.clusters) {
        json members = json::array();
        for (const auto& m : c.members) members.push_back({{"rater_id", m.rater_id}, {"bias", m.coords[0]}, {"consistency", m.coords[1]}});
        j["clusters"].push_back({{"center_id", c.center_id},
                                 {"centroid", {c.centroid[0], c.centroid[1]}},
                                 {"radius", c.radius},
                                 {"scatter", c.scatter},
                                 {"members", members}});
    }
    j["centroid_distances"] = json::array();
    for (const auto& d : report.distances) j["centroid_distances"].push_back({{"a", d.a}, {"b", d.b}, {"distance", d.distance}});
    j["db_index"] = report.db_index ? json(*report.db_index) : json(nullptr);
    if (!report.note.empty()) j["note"] = report.note;
    return j.dump(2) + "\n";
}

}  // namespace raterlab
