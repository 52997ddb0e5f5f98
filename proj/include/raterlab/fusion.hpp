#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "raterlab/manifest.hpp"
#include "raterlab/volume.hpp"

namespace raterlab {

enum class FusionMethod { Majority, Staple };

std::string to_string(FusionMethod m);
FusionMethod parse_fusion_method(const std::string& s);

/// Per-rater performance parameters of the STAPLE estimator plus run
/// controls. Empty sensitivity/specificity vectors mean "0.99 for every
/// rater"; an absent prior means the mean fraction of positive votes.
struct StapleParams {
    std::vector<double> sensitivity;
    std::vector<double> specificity;
    std::optional<double> prior;
    std::optional<Volume> prior_map;  // per-voxel prior, overrides `prior`
    int max_iters = 100;
    double tol = 1e-7;
};

struct FusionResult {
    Volume consensus;
    std::optional<Volume> posterior;
    std::optional<StapleParams> final_params;
    int iterations = 0;
    bool converged = true;
    /// An M-step denominator vanished; parameters were kept clamped.
    bool degenerate = false;
};

/// Probabilities are clamped to [kProbFloor, 1 - kProbFloor] inside the E-step.
inline constexpr double kProbFloor = 1e-12;

/// Voxel is positive iff 2 * votes >= number of raters (ties are positive).
FusionResult majority_vote(std::span<const Volume> masks);

/// Binary STAPLE expectation-maximisation. Needs at least two masks.
///
/// Each iteration runs one E-step with the current parameters (posterior
/// W_i = a_i / (a_i + b_i), computed in log space) followed by one M-step;
/// it stops once the largest change over all sensitivities and
/// specificities is below `tol`, or after `max_iters`. The returned
/// posterior is the last E-step, `final_params` the last M-step, and the
/// consensus is posterior >= 0.5.
FusionResult staple(std::span<const Volume> masks, const StapleParams& init = {});

struct RaterMask {
    std::string rater_id;
    std::string center_id;
    Volume mask;
};

/// Loads the masks of the raters of `subject_id` accepted by `filter`, sorted by rater_id.
std::vector<RaterMask> load_subject_masks(const DatasetManifest& manifest, const std::string& subject_id,
                                          const RaterFilter& filter);

FusionResult fuse_subset(const DatasetManifest& manifest, const std::string& subject_id, const RaterFilter& filter,
                         FusionMethod method, const StapleParams& staple_init = {});

/// Fuses already-loaded masks with the given method.
FusionResult fuse(std::span<const Volume> masks, FusionMethod method, const StapleParams& staple_init = {});

}  // namespace raterlab
