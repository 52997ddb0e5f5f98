#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "raterlab/style.hpp"

namespace raterlab {

/// A rater placed in (bias, consistency) space.
struct StylePoint {
    std::string rater_id;
    std::string center_id;
    std::array<double, 2> coords{};
};

std::vector<StylePoint> style_points(const StyleTable& table);

struct Cluster {
    std::string center_id;
    std::vector<StylePoint> members;
    std::array<double, 2> centroid{};
    double radius = 0.0;   // max member-to-centroid distance
    double scatter = 0.0;  // mean member-to-centroid distance
};

struct CentroidDistance {
    std::string a;
    std::string b;
    double distance = 0.0;
};

struct ClusterReport {
    std::vector<Cluster> clusters;  // sorted by center_id
    std::vector<CentroidDistance> distances;  // every unordered pair, a < b
    /// Unset with fewer than two clusters or coincident centroids; see `note`.
    std::optional<double> db_index;
    std::string note;
};

/// Groups points by center and measures centroids, radii, pairwise centroid
/// distances and the Davies-Bouldin index. Throws if two clusters hold the
/// same multiset of coordinates.
ClusterReport cluster_report(const std::vector<StylePoint>& points);

/// Davies-Bouldin index with mean-distance scatter and Euclidean centroid
/// separation: (1/k) sum_i max_{j!=i} (S_i + S_j) / M_ij. Unset for fewer
/// than two clusters or coincident centroids.
std::optional<double> davies_bouldin(const std::vector<Cluster>& clusters);

std::string cluster_report_json(const ClusterReport& report, const std::string& metadata_json = "{}");

}  // namespace raterlab
