#include "raterlab/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "raterlab/error.hpp"
#include "raterlab/kernels.hpp"
#include "raterlab/rvol.hpp"

namespace raterlab {

std::string to_string(FusionMethod m) { return m == FusionMethod::Majority ? "majority" : "staple"; }

FusionMethod parse_fusion_method(const std::string& s) {
    if (s == "majority") return FusionMethod::Majority;
    if (s == "staple") return FusionMethod::Staple;
    throw Error("unknown fusion method '" + s + "' (expected majority|staple)");
}

FusionResult majority_vote(std::span<const Volume> masks) {
    if (masks.empty()) throw Error("majority_vote: no masks");
    if (masks.size() > std::numeric_limits<std::uint16_t>::max()) throw Error("majority_vote: too many raters");
    require_same_geometry(masks, "majority_vote");
    const auto& k = kernels::active();
    const std::size_t n = masks.front().size();
    std::vector<std::uint16_t> votes(n, 0);
    for (const auto& m : masks) k.accumulate_votes(votes.data(), m.mask_values().data(), n);
    std::vector<std::uint8_t> out(n);
    k.threshold_votes(out.data(), votes.data(), n, static_cast<std::uint32_t>(masks.size()));
    FusionResult r;
    r.consensus = Volume::mask(masks.front().geometry(), std::move(out));
    return r;
}

namespace {

double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

void check_open_unit(double v, const char* what) {
    if (!(v > 0.0 && v < 1.0)) throw Error(std::string("staple: ") + what + " must lie in (0,1)");
}

}  // namespace

FusionResult staple(std::span<const Volume> masks, const StapleParams& init) {
    if (masks.size() < 2) throw Error("staple: needs at least 2 masks");
    require_same_geometry(masks, "staple");
    if (!(init.tol > 0.0)) throw Error("staple: tol must be > 0");
    if (init.max_iters < 1) throw Error("staple: max_iters must be >= 1");

    const std::size_t n_raters = masks.size();
    const std::size_t n = masks.front().size();
    const auto& k = kernels::active();

    std::vector<double> p = init.sensitivity.empty() ? std::vector<double>(n_raters, 0.99) : init.sensitivity;
    std::vector<double> q = init.specificity.empty() ? std::vector<double>(n_raters, 0.99) : init.specificity;
    if (p.size() != n_raters || q.size() != n_raters)
        throw Error("staple: initial parameter count does not match rater count");
    for (std::size_t j = 0; j < n_raters; ++j) {
        check_open_unit(p[j], "sensitivity");
        check_open_unit(q[j], "specificity");
    }

    // Prior log terms, per voxel or shared.
    std::vector<double> prior_pos, prior_neg;
    double scalar_prior = 0.0;
    if (init.prior_map) {
        require_same_geometry(*init.prior_map, masks.front(), "staple prior map");
        auto pm = init.prior_map->prob_values();
        prior_pos.resize(n);
        prior_neg.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double pr = clamp_prob(pm[i]);
            prior_pos[i] = std::log(pr);
            prior_neg[i] = std::log1p(-pr);
        }
    } else if (init.prior) {
        check_open_unit(*init.prior, "prior");
        scalar_prior = *init.prior;
    } else {
        std::uint64_t positives = 0;
        for (const auto& m : masks) positives += k.count_nonzero(m.mask_values().data(), n);
        scalar_prior = static_cast<double>(positives) / (static_cast<double>(n_raters) * static_cast<double>(n));
    }
    const double sp_pos = std::log(clamp_prob(scalar_prior));
    const double sp_neg = std::log1p(-clamp_prob(scalar_prior));

    std::vector<double> log_pos(n), log_neg(n), w(n);
    FusionResult result;
    result.converged = false;

    for (int it = 0; it < init.max_iters; ++it) {
        // E-step
        if (init.prior_map) {
            log_pos = prior_pos;
            log_neg = prior_neg;
        } else {
            std::fill(log_pos.begin(), log_pos.end(), sp_pos);
            std::fill(log_neg.begin(), log_neg.end(), sp_neg);
        }
        for (std::size_t j = 0; j < n_raters; ++j) {
            const double pj = clamp_prob(p[j]);
            const double qj = clamp_prob(q[j]);
            const kernels::RaterLogTerms terms{std::log(pj), std::log1p(-pj), std::log1p(-qj), std::log(qj)};
            k.staple_accumulate(log_pos.data(), log_neg.data(), masks[j].mask_values().data(), n, terms);
        }
        double sum_w = 0.0, sum_c = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = 1.0 / (1.0 + std::exp(log_neg[i] - log_pos[i]));
            sum_w += w[i];
            sum_c += 1.0 - w[i];
        }
        result.iterations = it + 1;

        // M-step
        if (sum_w <= 0.0 || sum_c <= 0.0) {
            result.degenerate = true;
            break;
        }
        double delta = 0.0;
        for (std::size_t j = 0; j < n_raters; ++j) {
            const auto s = k.staple_masked_sums(w.data(), masks[j].mask_values().data(), n);
            const double pj = clamp_prob(s.weight_on_votes1 / sum_w);
            const double qj = clamp_prob(s.complement_on_votes0 / sum_c);
            delta = std::max({delta, std::abs(pj - p[j]), std::abs(qj - q[j])});
            p[j] = pj;
            q[j] = qj;
        }
        if (delta < init.tol) {
            result.converged = true;
            break;
        }
    }

    std::vector<float> post(n);
    std::vector<std::uint8_t> cons(n);
    for (std::size_t i = 0; i < n; ++i) {
        post[i] = static_cast<float>(w[i]);
        cons[i] = post[i] >= 0.5f ? 1 : 0;
    }
    const Geometry& g = masks.front().geometry();
    result.consensus = Volume::mask(g, std::move(cons));
    result.posterior = Volume::probability(g, std::move(post));
    StapleParams fin = init;
    for (auto& v : p) v = clamp_prob(v);
    for (auto& v : q) v = clamp_prob(v);
    fin.sensitivity = std::move(p);
    fin.specificity = std::move(q);
    if (!init.prior_map) fin.prior = clamp_prob(scalar_prior);
    result.final_params = std::move(fin);
    return result;
}

FusionResult fuse(std::span<const Volume> masks, FusionMethod method, const StapleParams& staple_init) {
    return method == FusionMethod::Majority ? majority_vote(masks) : staple(masks, staple_init);
}

std::vector<RaterMask> load_subject_masks(const DatasetManifest& manifest, const std::string& subject_id,
                                          const RaterFilter& filter) {
    const auto& subject = manifest.subject(subject_id);
    std::vector<RaterMask> out;
    for (const auto& e : subject.entries) {
        if (filter && !filter(e.rater_id, e.center_id)) continue;
        Volume m = load_volume(manifest.resolve(e.mask_path));
        if (!m.is_mask()) throw Error("subject " + subject_id + ", rater " + e.rater_id + ": not a binary mask");
        out.push_back({e.rater_id, e.center_id, std::move(m)});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.rater_id < b.rater_id; });
    return out;
}

FusionResult fuse_subset(const DatasetManifest& manifest, const std::string& subject_id, const RaterFilter& filter,
                         FusionMethod method, const StapleParams& staple_init) {
    auto selected = load_subject_masks(manifest, subject_id, filter);
    if (selected.empty()) throw Error("fuse: rater filter selects no raters for subject " + subject_id);
    if (method == FusionMethod::Staple && selected.size() < 2)
        throw Error("fuse: STAPLE needs at least 2 raters, filter selected " + std::to_string(selected.size()));
    std::vector<Volume> masks;
    masks.reserve(selected.size());
    for (auto& s : selected) masks.push_back(std::move(s.mask));
    return fuse(masks, method, staple_init);
}

}  // namespace raterlab
