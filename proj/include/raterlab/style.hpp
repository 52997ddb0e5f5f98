#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "raterlab/fusion.hpp"
#include "raterlab/manifest.hpp"
#include "raterlab/volume.hpp"

namespace raterlab {

/// Positive-voxel counts of a rater mask and its consensus on one image.
struct CountPair {
    std::uint64_t rater = 0;
    std::uint64_t consensus = 0;
};

/// Relative metrics skip images whose consensus is empty; `value` is unset
/// when every image was skipped.
struct RelativeMetric {
    std::optional<double> value;
    std::size_t skipped = 0;
};

// Count-based forms. The Volume overloads below reduce to these.
double bias(std::span<const CountPair> counts);
double consistency(std::span<const CountPair> counts);
RelativeMetric relative_bias(std::span<const CountPair> counts);
RelativeMetric relative_consistency(std::span<const CountPair> counts);

/// Pairs positive counts per image; checks list lengths and geometry.
std::vector<CountPair> count_pairs(std::span<const Volume> rater_masks, std::span<const Volume> consensus_masks);

/// mean over images of (n_rater - n_consensus)
double bias(std::span<const Volume> rater_masks, std::span<const Volume> consensus_masks);
/// Population standard deviation of (n_rater - n_consensus).
double consistency(std::span<const Volume> rater_masks, std::span<const Volume> consensus_masks);
RelativeMetric relative_bias(std::span<const Volume> rater_masks, std::span<const Volume> consensus_masks);
RelativeMetric relative_consistency(std::span<const Volume> rater_masks, std::span<const Volume> consensus_masks);

enum class AssdMethod { Auto, BruteForce, DistanceTransform };

/// Average symmetric surface distance in mm: the mean distance from the
/// boundary voxels of one mask to the nearest boundary voxel of the other,
/// averaged over both directions. Boundary voxels are positives with a
/// background face neighbour. Unset when either mask is empty.
std::optional<double> assd(const Volume& a, const Volume& b, AssdMethod method = AssdMethod::Auto);

struct RaterStyle {
    std::string rater_id;
    std::string center_id;
    double bias = 0.0;
    double consistency = 0.0;
    std::optional<double> relative_bias;
    std::optional<double> relative_consistency;
    std::size_t n_images = 0;
    std::size_t skipped_images = 0;
};

struct ConsensusScope {
    enum class Kind { Global, Center, Custom };
    Kind kind = Kind::Global;
    std::string center_id;             // Kind::Center
    std::vector<std::string> raters;   // Kind::Custom

    static ConsensusScope global() { return {}; }
    static ConsensusScope center(std::string id) { return {Kind::Center, std::move(id), {}}; }
    static ConsensusScope custom(std::vector<std::string> ids) { return {Kind::Custom, {}, std::move(ids)}; }
    /// "global", "center:<id>" or "raters:<a>,<b>,..."
    static ConsensusScope parse(const std::string& text);

    std::string describe() const;
    RaterFilter filter() const;
};

struct StyleTable {
    std::vector<RaterStyle> rows;  // sorted by rater_id
    FusionMethod consensus_method = FusionMethod::Majority;
    ConsensusScope consensus_scope;
    bool slice_wise = false;
};

struct StyleOptions {
    bool slice_wise = false;  // every z-slice counts as an image
    StapleParams staple;
    std::size_t threads = 1;
};

/// Builds the scope consensus once per subject and measures every in-scope
/// rater against it (the rater itself is part of its consensus).
StyleTable style_table(const DatasetManifest& manifest, FusionMethod method, const ConsensusScope& scope,
                       const StyleOptions& options = {});

std::string style_table_csv(const StyleTable& table);
/// Parses the CSV written by style_table_csv.
StyleTable parse_style_csv(const std::string& text);

}  // namespace raterlab
