#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "raterlab/eval.hpp"
#include "raterlab/simulate.hpp"
#include "raterlab/uncertainty.hpp"

namespace raterlab {

/// Per subject ground truth of one model, aligned with manifest.subjects().
using ModelTargets = std::vector<std::optional<Volume>>;

using PredictorFactory =
    std::function<std::shared_ptr<const Predictor>(const ModelSpec& spec, const ModelTargets& targets)>;

struct UncertaintyRunOptions {
    TtaConfig tta;
    FusionMethod consensus = FusionMethod::Majority;
    StapleParams staple;
    std::optional<std::filesystem::path> maps_dir;  // entropy maps as <dir>/<model>/<subject>.rvol
};

struct UncertaintyRun {
    std::vector<UncertaintyRow> rows;
    std::vector<DiceRow> dice;  // reference prediction against the model's own truth
};

/// TTA uncertainty for every model over every subject that has an image.
UncertaintyRun run_uncertainty(const DatasetManifest& manifest, const std::vector<ModelSpec>& models,
                               const PredictorFactory& factory, const UncertaintyRunOptions& options);

/// Factory for the built-in synthetic predictors. "biased" learns its boundary
/// shift per model: the in-plane shift that best turns the subject truth
/// (truth_path, or the global majority consensus) into the model's targets.
/// Fitted shifts are reported through `fitted` when given.
PredictorFactory synthetic_factory(const DatasetManifest& manifest, const std::string& name,
                                   const SyntheticParams& params, std::map<std::string, double>* fitted = nullptr);

/// Filesystem-safe form of a model id.
std::string model_dir_name(const std::string& model_id);

}  // namespace raterlab
