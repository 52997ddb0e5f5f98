#include "raterlab/simulate.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <random>

#include "json.hpp"
#include "raterlab/distance.hpp"
#include "raterlab/error.hpp"
#include "raterlab/morphology.hpp"
#include "raterlab/parallel.hpp"
#include "raterlab/preprocess.hpp"
#include "raterlab/rng.hpp"
#include "raterlab/rvol.hpp"

namespace raterlab {

namespace fs = std::filesystem;

void validate_rater_model(const RaterModel& m) {
    if (m.rater_id.empty()) throw Error("rater model: empty rater_id");
    if (!std::isfinite(m.center_style) || !std::isfinite(m.rater_offset))
        throw Error("rater model " + m.rater_id + ": non-finite style");
    if (!(m.jitter_sigma >= 0.0)) throw Error("rater model " + m.rater_id + ": jitter_sigma must be >= 0");
    if (!(m.flip_rate >= 0.0 && m.flip_rate < 1.0))
        throw Error("rater model " + m.rater_id + ": flip_rate must lie in [0, 1)");
}

std::vector<RaterModel> parse_rater_models(const std::string& text) {
    using nlohmann::json;
    try {
        const json j = json::parse(text);
        const json& arr = j.is_array() ? j : j.at("raters");
        std::vector<RaterModel> out;
        for (const auto& r : arr) {
            RaterModel m;
            m.rater_id = r.at("rater_id").get<std::string>();
            m.center_id = r.at("center_id").get<std::string>();
            m.center_style = r.value("center_style", 0.0);
            m.rater_offset = r.value("rater_offset", 0.0);
            m.jitter_sigma = r.value("jitter_sigma", 0.0);
            m.flip_rate = r.value("flip_rate", 0.0);
            validate_rater_model(m);
            out.push_back(std::move(m));
        }
        if (out.empty()) throw Error("rater spec: no raters");
        return out;
    } catch (const json::exception& e) {
        throw Error(std::string("rater spec: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Phantoms

namespace {

struct Box {
    std::array<long long, 3> lo, hi;  // inclusive voxel bounds
};

Box bounding_box(const Ellipsoid& e, const Geometry& g) {
    Box b;
    for (int a = 0; a < 3; ++a) {
        const double c = (static_cast<double>(e.centre_voxel[a]) + 0.5) * g.spacing[a];
        b.lo[a] = std::max(0LL, static_cast<long long>(std::floor((c - e.radii_mm[a]) / g.spacing[a])));
        b.hi[a] = std::min(static_cast<long long>(g.dims[a]) - 1,
                           static_cast<long long>(std::floor((c + e.radii_mm[a]) / g.spacing[a])));
    }
    return b;
}

bool boxes_touch(const Box& a, const Box& b, const Geometry& g) {
    // One-voxel gap required on the in-plane axes; z only matters when the
    // grid is thick enough to stack objects.
    for (int ax = 0; ax < 3; ++ax) {
        if (ax == 2 && g.nz() < 3) continue;
        if (a.hi[ax] + 1 < b.lo[ax] || b.hi[ax] + 1 < a.lo[ax]) return false;
    }
    return true;
}

double inside(const Ellipsoid& e, const Geometry& g, double px, double py, double pz) {
    const double p[3] = {px, py, pz};
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double c = (static_cast<double>(e.centre_voxel[a]) + 0.5) * g.spacing[a];
        const double d = (p[a] - c) / e.radii_mm[a];
        s += d * d;
    }
    return s;
}

}  // namespace

Phantom generate_phantom(const PhantomConfig& cfg, std::uint64_t seed) {
    if (cfg.n_objects < 1) throw Error("generate_phantom: n_objects must be >= 1 (the true mask must be nonempty)");
    if (!(cfg.radius_mm.lo > 0.0) || cfg.radius_mm.lo > cfg.radius_mm.hi)
        throw Error("generate_phantom: malformed radius range");
    if (cfg.supersample < 1) throw Error("generate_phantom: supersample must be >= 1");
    const Geometry& g = cfg.geometry;
    std::mt19937_64 gen(seed);

    std::array<double, 3> r_max{};
    for (int a = 0; a < 3; ++a)
        r_max[a] = g.spacing[a] * (static_cast<double>((g.dims[a] - 1) / 2) + 0.5);

    std::vector<Ellipsoid> objects;
    std::vector<Box> boxes;
    constexpr int kRetries = 200;
    for (int o = 0; o < cfg.n_objects; ++o) {
        bool placed = false;
        for (int attempt = 0; attempt < kRetries && !placed; ++attempt) {
            Ellipsoid e;
            for (int a = 0; a < 3; ++a) {
                double r = cfg.radius_mm.lo == cfg.radius_mm.hi
                               ? cfg.radius_mm.lo
                               : std::uniform_real_distribution<double>(cfg.radius_mm.lo, cfg.radius_mm.hi)(gen);
                r = std::min(r, r_max[a]);
                e.radii_mm[a] = r;
                // valid centres: (c + 0.5) s - r >= 0 and (c + 0.5) s + r <= n s
                const auto lo = static_cast<long long>(std::ceil(r / g.spacing[a] - 0.5 - 1e-9));
                const auto hi = static_cast<long long>(std::floor(static_cast<double>(g.dims[a]) - 0.5 -
                                                                  r / g.spacing[a] + 1e-9));
                if (lo > hi) throw Error("generate_phantom: object does not fit the grid");
                e.centre_voxel[a] =
                    static_cast<std::size_t>(std::uniform_int_distribution<long long>(lo, hi)(gen));
            }
            const Box b = bounding_box(e, g);
            if (std::none_of(boxes.begin(), boxes.end(), [&](const Box& other) { return boxes_touch(b, other, g); })) {
                objects.push_back(e);
                boxes.push_back(b);
                placed = true;
            }
        }
        if (!placed)
            throw Error("generate_phantom: cannot place object " + std::to_string(o + 1) + " after " +
                        std::to_string(kRetries) + " attempts");
    }

    std::vector<std::uint8_t> mask(g.voxel_count(), 0);
    std::vector<float> pv(g.voxel_count(), 0.0f);
    const int k = cfg.supersample;
    for (std::size_t oi = 0; oi < objects.size(); ++oi) {
        const Ellipsoid& e = objects[oi];
        const Box& b = boxes[oi];
        for (long long z = b.lo[2]; z <= b.hi[2]; ++z)
            for (long long y = b.lo[1]; y <= b.hi[1]; ++y)
                for (long long x = b.lo[0]; x <= b.hi[0]; ++x) {
                    const std::size_t idx = g.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                                                    static_cast<std::size_t>(z));
                    const double cx = (static_cast<double>(x) + 0.5) * g.spacing[0];
                    const double cy = (static_cast<double>(y) + 0.5) * g.spacing[1];
                    const double cz = (static_cast<double>(z) + 0.5) * g.spacing[2];
                    if (inside(e, g, cx, cy, cz) <= 1.0) mask[idx] = 1;
                    int hits = 0;
                    for (int sz = 0; sz < k; ++sz)
                        for (int sy = 0; sy < k; ++sy)
                            for (int sx = 0; sx < k; ++sx) {
                                const double px = (static_cast<double>(x) + (sx + 0.5) / k) * g.spacing[0];
                                const double py = (static_cast<double>(y) + (sy + 0.5) / k) * g.spacing[1];
                                const double pz = (static_cast<double>(z) + (sz + 0.5) / k) * g.spacing[2];
                                hits += inside(e, g, px, py, pz) <= 1.0;
                            }
                    pv[idx] = std::max(pv[idx], static_cast<float>(hits) / static_cast<float>(k * k * k));
                }
    }
    if (cfg.noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
        for (auto& v : pv) v = static_cast<float>(v + noise(gen));
    }
    Phantom ph;
    ph.true_mask = Volume::mask(g, std::move(mask));
    ph.intensity = Volume::intensity(g, std::move(pv));
    ph.objects = std::move(objects);
    return ph;
}

Volume simulate_rater(const Phantom& phantom, const RaterModel& model, std::uint64_t seed) {
    validate_rater_model(model);
    std::mt19937_64 gen(seed);
    const double mean = model.center_style + model.rater_offset;
    const double drawn = model.jitter_sigma > 0.0 ? std::normal_distribution<double>(mean, model.jitter_sigma)(gen) : mean;
    const int steps = static_cast<int>(std::lround(drawn));
    Volume m = morph::dilate_or_erode_clamped(phantom.true_mask, steps);
    if (model.flip_rate <= 0.0) return m;

    const Volume inner = morph::inner_boundary(m);
    const Volume outer = morph::outer_boundary(m);
    auto in = inner.mask_values();
    auto out = outer.mask_values();
    auto src = m.mask_values();
    std::vector<std::uint8_t> flipped(src.begin(), src.end());
    std::bernoulli_distribution coin(model.flip_rate);
    for (std::size_t i = 0; i < flipped.size(); ++i)
        if ((in[i] || out[i]) && coin(gen)) flipped[i] ^= 1;
    if (std::none_of(flipped.begin(), flipped.end(), [](std::uint8_t v) { return v != 0; })) return m;
    return Volume::mask(m.geometry(), std::move(flipped));
}

namespace {

// Signed distance of every pixel of a binary plane to its boundary, negative
// inside: 0.5 - d(bg) for positives, d(fg) - 0.5 for the rest.
std::vector<double> signed_distance(const std::uint8_t* m, std::size_t nx, std::size_t ny) {
    const Geometry g({nx, ny, 1}, {1.0, 1.0, 1.0});
    std::vector<std::size_t> fg, bg;
    for (std::size_t i = 0; i < nx * ny; ++i) (m[i] ? fg : bg).push_back(i);
    const auto to_fg = squared_distance_map(g, fg);
    const auto to_bg = squared_distance_map(g, bg);
    std::vector<double> d(nx * ny);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = m[i] ? 0.5 - std::sqrt(to_bg[i]) : std::sqrt(to_fg[i]) - 0.5;
    return d;
}

}  // namespace

Volume shift_boundary(const Volume& mask, double px) {
    const Geometry& g = mask.geometry();
    const auto m = mask.mask_values();
    const std::size_t plane = g.nx() * g.ny();
    std::vector<std::uint8_t> out(g.voxel_count());
    for (std::size_t z = 0; z < g.nz(); ++z) {
        const auto d = signed_distance(m.data() + z * plane, g.nx(), g.ny());
        for (std::size_t i = 0; i < plane; ++i) out[z * plane + i] = d[i] <= px ? 1 : 0;
    }
    return Volume::mask(g, std::move(out));
}

double fit_boundary_shift(const std::vector<Volume>& truths, const std::vector<Volume>& targets, double max_px,
                          double step) {
    if (truths.empty() || truths.size() != targets.size()) throw Error("fit_boundary_shift: mismatched inputs");
    if (!(step > 0.0) || !(max_px >= 0.0)) throw Error("fit_boundary_shift: malformed search grid");
    // Sorted signed distances per plane turn every candidate into a binary search.
    std::vector<std::vector<double>> dist;
    std::vector<double> want;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        require_same_geometry(truths[i], targets[i], "fit_boundary_shift");
        const Geometry& g = truths[i].geometry();
        const auto m = truths[i].mask_values();
        const std::size_t plane = g.nx() * g.ny();
        std::vector<double> all;
        for (std::size_t z = 0; z < g.nz(); ++z) {
            const auto d = signed_distance(m.data() + z * plane, g.nx(), g.ny());
            all.insert(all.end(), d.begin(), d.end());
        }
        std::sort(all.begin(), all.end());
        dist.push_back(std::move(all));
        want.push_back(static_cast<double>(positive_count(targets[i])));
    }
    const auto cost = [&](double b) {
        double c = 0.0;
        for (std::size_t i = 0; i < dist.size(); ++i) {
            const auto n = std::upper_bound(dist[i].begin(), dist[i].end(), b) - dist[i].begin();
            c += std::abs(static_cast<double>(n) - want[i]);
        }
        return c;
    };
    // Half-step grid: lattice distances (sqrt(k) - 1/2) never land on a
    // candidate, so no pixel sits exactly on the shifted edge.
    double best = 0.0, best_cost = INFINITY;
    for (long long k = 0; (static_cast<double>(k) + 0.5) * step <= max_px + 1e-9; ++k) {
        const double b = (static_cast<double>(k) + 0.5) * step;
        for (double cand : {-b, b}) {
            const double c = cost(cand);
            if (c < best_cost) {
                best_cost = c;
                best = cand;
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Synthetic predictors

namespace {

// Separable [1 4 6 4 1] / 16 blur, edge-clamped.
Image2D smooth(const Image2D& in) {
    static constexpr float w[5] = {1.f / 16, 4.f / 16, 6.f / 16, 4.f / 16, 1.f / 16};
    const auto nx = static_cast<long long>(in.nx), ny = static_cast<long long>(in.ny);
    Image2D tmp(in.nx, in.ny), out(in.nx, in.ny);
    for (long long y = 0; y < ny; ++y)
        for (long long x = 0; x < nx; ++x) {
            float s = 0.f;
            for (int d = -2; d <= 2; ++d) s += w[d + 2] * in.data[std::clamp(x + d, 0LL, nx - 1) + nx * y];
            tmp.data[x + nx * y] = s;
        }
    for (long long y = 0; y < ny; ++y)
        for (long long x = 0; x < nx; ++x) {
            float s = 0.f;
            for (int d = -2; d <= 2; ++d) s += w[d + 2] * tmp.data[x + nx * std::clamp(y + d, 0LL, ny - 1)];
            out.data[x + nx * y] = s;
        }
    return out;
}

Image2D oracle_map(const Image2D& input) {
    Image2D p = smooth(input);
    for (float& v : p.data) v = std::clamp(v, 0.f, 1.f);
    return p;
}

// Noise in [-1, 1] determined by the input value and position.
float input_noise(const Image2D& input, std::size_t i) {
    const std::uint64_t bits = std::bit_cast<std::uint32_t>(input.data[i]);
    const std::uint64_t h = rng::splitmix64(bits ^ rng::splitmix64(i));
    return static_cast<float>(static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0);
}

// Soft-edged map of `seg` with its boundary moved out by `shift` pixels and
// jittered per pixel by up to `jitter` pixels.
Image2D soft_edge(const Image2D& input, const std::vector<std::uint8_t>& seg, double shift, double jitter) {
    constexpr double kEdgePx = 4.0;
    const auto d = signed_distance(seg.data(), input.nx, input.ny);
    Image2D p(input.nx, input.ny);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double edge = shift + (jitter > 0.0 ? jitter * input_noise(input, i) : 0.0);
        p.data[i] = static_cast<float>(std::clamp(0.5 - (d[i] - edge) / kEdgePx, 0.0, 1.0));
    }
    return p;
}

std::vector<std::uint8_t> oracle_segmentation(const Image2D& input) {
    const Image2D o = oracle_map(input);
    std::vector<std::uint8_t> seg(o.data.size());
    for (std::size_t i = 0; i < seg.size(); ++i) seg[i] = o.data[i] >= 0.5f ? 1 : 0;
    return seg;
}

class OraclePredictor final : public Predictor {
public:
    Image2D predict(const Image2D& input, const PredictContext&) const override { return oracle_map(input); }
    std::string name() const override { return "synthetic:oracle"; }
};

class NoisyBoundaryPredictor final : public Predictor {
public:
    NoisyBoundaryPredictor(double shift, double jitter, std::string name)
        : shift_(shift), jitter_(jitter), name_(std::move(name)) {}
    Image2D predict(const Image2D& input, const PredictContext&) const override {
        return soft_edge(input, oracle_segmentation(input), shift_, jitter_);
    }
    std::string name() const override { return name_; }

private:
    double shift_;
    double jitter_;
    std::string name_;
};

}  // namespace

double biased_sigma(const SyntheticParams& p) { return p.sigma_base * std::exp(p.sigma_gain * p.bias_px); }

std::unique_ptr<Predictor> synthetic_predictor(const std::string& name, const SyntheticParams& params) {
    if (name == "oracle") return std::make_unique<OraclePredictor>();
    if (name == "noisy_boundary") {
        if (!(params.sigma >= 0.0)) throw Error("noisy_boundary: sigma must be >= 0");
        return std::make_unique<NoisyBoundaryPredictor>(0.0, params.sigma,
                                                        fmt::format("synthetic:noisy_boundary:{}", params.sigma));
    }
    if (name == "biased") {
        const double sigma = biased_sigma(params);
        if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw Error("biased: noise amplitude must be finite and >= 0");
        return std::make_unique<NoisyBoundaryPredictor>(
            params.bias_px, sigma, fmt::format("synthetic:biased:{}:{}", params.bias_px, sigma));
    }
    throw Error("unknown synthetic predictor '" + name + "' (expected oracle, noisy_boundary or biased)");
}

// ---------------------------------------------------------------------------
// Cohorts

Cohort generate_cohort(const CohortConfig& config, std::size_t threads) {
    if (config.n_subjects < 1) throw Error("cohort: needs at least one subject");
    if (config.raters.empty()) throw Error("cohort: needs at least one rater");
    for (const auto& r : config.raters) validate_rater_model(r);
    Cohort c;
    c.config = config;
    c.subjects.resize(config.n_subjects);
    parallel_for(config.n_subjects, threads, [&](std::size_t s) {
        CohortSubject& subj = c.subjects[s];
        subj.subject_id = fmt::format("sub-{:03d}", s + 1);
        subj.phantom = generate_phantom(config.phantom, rng::derive(config.seed, {rng::hash("phantom"), s}));
        for (const auto& r : config.raters)
            subj.rater_masks.push_back(
                simulate_rater(subj.phantom, r, rng::derive(config.seed, {rng::hash("rater"), rng::hash(r.rater_id), s})));
    });
    return c;
}

DatasetManifest write_cohort(const Cohort& cohort, const fs::path& out_dir) {
    std::vector<ManifestSubject> subjects;
    for (const auto& s : cohort.subjects) {
        ManifestSubject ms;
        ms.subject_id = s.subject_id;
        const std::string dir = "subjects/" + s.subject_id + "/";
        save_volume(out_dir / (dir + "truth.rvol"), s.phantom.true_mask);
        save_volume(out_dir / (dir + "image.rvol"), s.phantom.intensity);
        ms.truth_path = dir + "truth.rvol";
        ms.image_path = dir + "image.rvol";
        for (std::size_t r = 0; r < cohort.config.raters.size(); ++r) {
            const auto& model = cohort.config.raters[r];
            const std::string rel = dir + "rater-" + model.rater_id + ".rvol";
            save_volume(out_dir / rel, s.rater_masks[r]);
            ms.entries.push_back({model.rater_id, model.center_id, rel});
        }
        subjects.push_back(std::move(ms));
    }
    DatasetManifest manifest(std::move(subjects), out_dir, cohort.config.raters);
    manifest.save(out_dir / "manifest.json");
    return manifest;
}

std::vector<RaterModel> paper_shape_raters() {
    return {
        {"rater1", "center1", 2.0, -0.3, 0.6, 0.02}, {"rater2", "center1", 2.0, -0.1, 0.6, 0.02},
        {"rater3", "center1", 2.0, 0.1, 0.6, 0.02},  {"rater4", "center1", 2.0, 0.3, 0.6, 0.02},
        {"rater5", "center2", -1.0, -0.2, 0.4, 0.02}, {"rater6", "center2", -1.0, 0.2, 0.4, 0.02},
        {"rater7", "center3", 4.0, 0.0, 0.5, 0.02},
    };
}

}  // namespace raterlab
