#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "raterlab/fusion.hpp"
#include "raterlab/manifest.hpp"
#include "raterlab/style.hpp"
#include "raterlab/volume.hpp"

namespace raterlab {

/// 2|A and B| / (|A| + |B|); two empty masks score 1.
double dice(const Volume& a, const Volume& b);

struct RegressionResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t n = 0;
};

/// Least squares with intercept, R^2 = 1 - SS_res / SS_tot. Throws for fewer
/// than three points, constant x or constant y.
RegressionResult ols_r2(std::span<const double> x, std::span<const double> y);
double pearson(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// Models. One model is trained per rater, per center consensus and on the
// global consensus. Ids: "<rater_id>", "consensus:center:<id>",
// "consensus:global".

enum class ModelScope { Rater, CenterConsensus, GlobalConsensus };
std::string to_string(ModelScope s);  // rater | center-consensus | global-consensus

struct ModelSpec {
    std::string model_id;
    ModelScope scope = ModelScope::Rater;
    std::string center_id;  // rater's center or the consensus center; empty for global
    std::string rater_id;   // Rater scope only

    /// Label of the ground truth the model learns from and is scored against.
    std::string truth_label() const;
    RaterFilter filter() const;
};

ModelSpec parse_model_id(const std::string& model_id, const std::map<std::string, std::string>& center_by_rater);
std::vector<ModelSpec> model_specs(const DatasetManifest& manifest, bool with_consensus);

/// The model's ground truth on one subject: the rater's own mask, or the
/// fused consensus of its scope. Null when the rater did not label the subject.
std::optional<Volume> model_target(const DatasetManifest& manifest, const ModelSpec& spec,
                                   const std::string& subject_id, FusionMethod method,
                                   const StapleParams& staple = {});

// ---------------------------------------------------------------------------
// Per-image result rows, as exchanged through CSV files.

struct UncertaintyRow {
    std::string model_id;  // CSV column rater_id
    std::string image_id;
    std::optional<double> mean_entropy_union;
    double mean_entropy_all = 0.0;
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
};

struct DiceRow {
    std::string model_id;
    std::string image_id;
    double dice = 0.0;
    bool both_empty = false;
};

std::string uncertainty_csv(std::span<const UncertaintyRow> rows);
std::vector<UncertaintyRow> parse_uncertainty_csv(const std::string& text);
std::string dice_csv(std::span<const DiceRow> rows);
std::vector<DiceRow> parse_dice_csv(const std::string& text);

/// Per-model averages over images.
struct ModelSummary {
    ModelSpec spec;
    std::optional<double> uncertainty;      // mean of defined union means
    std::optional<double> uncertainty_all;  // mean of all-voxel means
    std::optional<double> dice;
    std::size_t n_uncertainty_images = 0;
    std::size_t n_dice_images = 0;
    std::size_t n_empty_pairs = 0;
};

// ---------------------------------------------------------------------------
// Comparison of single-rater and consensus models (Table 1 layout).

struct ComparisonRow {
    std::string scope;  // rater | center-consensus | global-consensus | raters-average
    std::string model_id;
    std::string center_id;
    std::string trained_on;
    std::string evaluated_on;
    std::optional<double> dice;
    std::optional<double> uncertainty;
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows;
    /// global consensus uncertainty / mean single-rater uncertainty
    std::optional<double> uncertainty_ratio;
    std::vector<std::string> flags;
};

std::vector<ModelSummary> summarize_models(const StyleTable& styles, std::span<const UncertaintyRow> uncertainty,
                                           std::span<const DiceRow> dice);
ComparisonTable consensus_comparison(const StyleTable& styles, std::span<const UncertaintyRow> uncertainty,
                                     std::span<const DiceRow> dice = {});

struct Report {
    std::map<std::string, std::string> plot_csvs;  // file name -> contents
    std::string json;
};

/// Builds the six plot-data tables and report.json. `metadata_json` is
/// embedded verbatim under "metadata".
Report build_report(const StyleTable& styles, std::span<const UncertaintyRow> uncertainty,
                    std::span<const DiceRow> dice, const std::string& metadata_json = "{}");

}  // namespace raterlab
