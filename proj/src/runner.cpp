#include "raterlab/runner.hpp"

#include <algorithm>

#include "raterlab/error.hpp"
#include "raterlab/preprocess.hpp"
#include "raterlab/rvol.hpp"

namespace raterlab {

std::string model_dir_name(const std::string& model_id) {
    std::string s = model_id;
    for (char& c : s)
        if (c == ':' || c == '/' || c == '\\') c = '_';
    return s;
}

UncertaintyRun run_uncertainty(const DatasetManifest& manifest, const std::vector<ModelSpec>& models,
                               const PredictorFactory& factory, const UncertaintyRunOptions& options) {
    options.tta.ranges.validate();
    const auto& subjects = manifest.subjects();
    std::vector<std::optional<Volume>> images(subjects.size());
    for (std::size_t s = 0; s < subjects.size(); ++s)
        if (subjects[s].image_path) images[s] = load_volume(manifest.resolve(*subjects[s].image_path));
    if (std::none_of(images.begin(), images.end(), [](const auto& v) { return v.has_value(); }))
        throw Error("uncertainty: no subject in the manifest has an image_path");

    UncertaintyRun run;
    for (const auto& spec : models) {
        ModelTargets targets(subjects.size());
        for (std::size_t s = 0; s < subjects.size(); ++s)
            targets[s] = model_target(manifest, spec, subjects[s].subject_id, options.consensus, options.staple);
        const auto predictor = factory(spec, targets);
        for (std::size_t s = 0; s < subjects.size(); ++s) {
            if (!images[s]) continue;
            const auto& id = subjects[s].subject_id;
            const auto vu = volume_uncertainty(*images[s], *predictor, options.tta, spec.model_id, id);
            const auto summary = summarize({vu.entropy}, {vu.union_mask}, {id});
            const auto& img = summary.images.front();
            run.rows.push_back({spec.model_id, id, img.mean_entropy_union, img.mean_entropy_all,
                                options.tta.n_samples, options.tta.seed});
            if (targets[s]) {
                const bool empty = positive_count(vu.prediction) == 0 && positive_count(*targets[s]) == 0;
                run.dice.push_back({spec.model_id, id, dice(vu.prediction, *targets[s]), empty});
            }
            if (options.maps_dir)
                save_volume(*options.maps_dir / model_dir_name(spec.model_id) / (id + ".rvol"), vu.entropy);
        }
    }
    return run;
}

PredictorFactory synthetic_factory(const DatasetManifest& manifest, const std::string& name,
                                   const SyntheticParams& params, std::map<std::string, double>* fitted) {
    synthetic_predictor(name, params);  // rejects unknown names up front
    if (name != "biased") {
        return [name, params](const ModelSpec&, const ModelTargets&) -> std::shared_ptr<const Predictor> {
            return synthetic_predictor(name, params);
        };
    }
    // Base segmentation per subject, from which the shift is fitted.
    auto base = std::make_shared<std::vector<std::optional<Volume>>>();
    for (const auto& subj : manifest.subjects()) {
        if (subj.truth_path) {
            base->push_back(load_volume(manifest.resolve(*subj.truth_path)));
        } else {
            ModelSpec global{"consensus:global", ModelScope::GlobalConsensus, {}, {}};
            base->push_back(model_target(manifest, global, subj.subject_id, FusionMethod::Majority));
        }
    }
    return [base, params, fitted](const ModelSpec& spec, const ModelTargets& targets) -> std::shared_ptr<const Predictor> {
        std::vector<Volume> truth_planes, target_planes;
        for (std::size_t s = 0; s < targets.size(); ++s) {
            if (!targets[s] || !(*base)[s]) continue;
            for (auto& p : slices(*(*base)[s])) truth_planes.push_back(std::move(p));
            for (auto& p : slices(*targets[s])) target_planes.push_back(std::move(p));
        }
        if (truth_planes.empty()) throw Error("synthetic:biased: model " + spec.model_id + " has no training masks");
        SyntheticParams p = params;
        p.bias_px = fit_boundary_shift(truth_planes, target_planes);
        if (fitted) (*fitted)[spec.model_id] = p.bias_px;
        return synthetic_predictor("biased", p);
    };
}

}  // namespace raterlab
