#include "raterlab/uncertainty.hpp"

#include <cmath>
#include <numbers>

#include "raterlab/error.hpp"
#include "raterlab/kernels.hpp"
#include "raterlab/parallel.hpp"
#include "raterlab/rng.hpp"

namespace raterlab {

Image2D plane_of(const Volume& v, std::size_t z) {
    const Geometry& g = v.geometry();
    if (z >= g.nz()) throw Error("plane_of: slice out of range");
    Image2D img(g.nx(), g.ny());
    const std::size_t off = z * g.nx() * g.ny();
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(v.value(off + i));
    return img;
}

TtaRanges TtaRanges::symmetric(double rot_deg, double trans_px, double scale) {
    TtaRanges r;
    r.rotation_deg = {-std::abs(rot_deg), std::abs(rot_deg)};
    r.translation_px = {-std::abs(trans_px), std::abs(trans_px)};
    r.scale = {1.0 - std::abs(scale), 1.0 + std::abs(scale)};
    return r;
}

void TtaRanges::validate() const {
    const auto check = [](const Range& r, const char* what) {
        if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi)
            throw Error(std::string("TTA ranges: malformed ") + what + " range");
    };
    check(rotation_deg, "rotation");
    check(translation_px, "translation");
    check(scale, "scale");
    if (!(scale.lo > 0.0)) throw Error("TTA ranges: scale range must be positive");
}

std::array<double, 2> TtaTransform::apply(std::array<double, 2> p, std::array<double, 2> c) const {
    const double th = rotation_deg * std::numbers::pi / 180.0;
    const double cs = std::cos(th), sn = std::sin(th);
    const double dx = p[0] - c[0], dy = p[1] - c[1];
    return {c[0] + scale * (cs * dx - sn * dy) + translation[0], c[1] + scale * (sn * dx + cs * dy) + translation[1]};
}

TtaTransform TtaTransform::inverse() const {
    // p = c + (1/s) R(-th) (p' - c - t)
    const double th = -rotation_deg * std::numbers::pi / 180.0;
    const double cs = std::cos(th), sn = std::sin(th);
    TtaTransform inv;
    inv.rotation_deg = -rotation_deg;
    inv.scale = 1.0 / scale;
    inv.translation = {-(cs * translation[0] - sn * translation[1]) / scale,
                       -(sn * translation[0] + cs * translation[1]) / scale};
    return inv;
}

double TtaTransform::max_displacement(std::size_t nx, std::size_t ny) const {
    const std::array<double, 2> c{(static_cast<double>(nx) - 1.0) / 2.0, (static_cast<double>(ny) - 1.0) / 2.0};
    double best = 0.0;
    // The displacement is affine in p, so its norm peaks at a corner.
    for (double x : {0.0, static_cast<double>(nx) - 1.0})
        for (double y : {0.0, static_cast<double>(ny) - 1.0}) {
            const auto q = apply({x, y}, c);
            best = std::max(best, std::hypot(q[0] - x, q[1] - y));
        }
    return best;
}

TtaTransform sample_transform(const TtaRanges& ranges, std::mt19937_64& rng) {
    ranges.validate();
    const auto draw = [&](const Range& r) {
        if (r.lo == r.hi) return r.lo;
        return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
    };
    TtaTransform t;
    t.rotation_deg = draw(ranges.rotation_deg);
    t.translation[0] = draw(ranges.translation_px);
    t.translation[1] = draw(ranges.translation_px);
    t.scale = draw(ranges.scale);
    return t;
}

Image2D apply_transform(const Image2D& plane, const TtaTransform& t, Interp interp) {
    if (plane.nx == 0 || plane.ny == 0) throw Error("apply_transform: empty plane");
    const TtaTransform inv = t.inverse();
    const std::array<double, 2> c{(static_cast<double>(plane.nx) - 1.0) / 2.0,
                                  (static_cast<double>(plane.ny) - 1.0) / 2.0};
    const auto nx = static_cast<long long>(plane.nx), ny = static_cast<long long>(plane.ny);
    const auto read = [&](long long x, long long y) -> float {
        if (x < 0 || y < 0 || x >= nx || y >= ny) return 0.0f;
        return plane.data[static_cast<std::size_t>(x + nx * y)];
    };
    Image2D out(plane.nx, plane.ny);
    for (long long y = 0; y < ny; ++y)
        for (long long x = 0; x < nx; ++x) {
            const auto s = inv.apply({static_cast<double>(x), static_cast<double>(y)}, c);
            float v;
            if (interp == Interp::Nearest) {
                v = read(static_cast<long long>(std::floor(s[0] + 0.5)), static_cast<long long>(std::floor(s[1] + 0.5)));
            } else {
                const double fx0 = std::floor(s[0]), fy0 = std::floor(s[1]);
                const double fx = s[0] - fx0, fy = s[1] - fy0;
                const auto x0 = static_cast<long long>(fx0), y0 = static_cast<long long>(fy0);
                const double acc = (1.0 - fx) * (1.0 - fy) * read(x0, y0) + fx * (1.0 - fy) * read(x0 + 1, y0) +
                                   (1.0 - fx) * fy * read(x0, y0 + 1) + fx * fy * read(x0 + 1, y0 + 1);
                v = static_cast<float>(acc);
            }
            out.data[static_cast<std::size_t>(x + nx * y)] = v;
        }
    return out;
}

std::uint64_t sample_stream_seed(std::uint64_t seed, const std::string& image_id, std::size_t slice,
                                 std::size_t sample) {
    return rng::derive(seed, {rng::hash(image_id), slice, sample});
}

McStack mc_predict(const Image2D& plane, const Predictor& predictor, const TtaConfig& config,
                   const PredictContext& ctx) {
    if (config.n_samples < 2) throw Error("mc_predict: needs at least 2 samples");
    config.ranges.validate();
    McStack stack;
    stack.samples.resize(config.n_samples);
    stack.transforms.resize(config.n_samples);
    parallel_for(config.n_samples, config.threads, [&](std::size_t k) {
        std::mt19937_64 gen(sample_stream_seed(config.seed, ctx.image_id, ctx.slice, k));
        const TtaTransform t = sample_transform(config.ranges, gen);
        PredictContext c = ctx;
        c.sample = k;
        c.reference = false;
        Image2D pred;
        try {
            pred = predictor.predict(apply_transform(plane, t, Interp::Bilinear), c);
        } catch (const std::exception& e) {
            throw Error("predictor " + predictor.name() + " failed on sample " + std::to_string(k) + ": " + e.what());
        }
        if (!pred.same_shape(plane))
            throw Error("predictor " + predictor.name() + " returned a wrong-shaped map on sample " + std::to_string(k));
        Image2D back = apply_transform(pred, t.inverse(), Interp::Bilinear);
        for (float& v : back.data) v = std::clamp(v, 0.0f, 1.0f);
        stack.transforms[k] = t;
        stack.samples[k] = std::move(back);
    });
    return stack;
}

double bernoulli_entropy(double f) {
    if (f <= 0.0 || f >= 1.0) return 0.0;
    return -f * std::log(f) - (1.0 - f) * std::log(1.0 - f);
}

namespace {

std::vector<std::uint16_t> positive_frequencies(const McStack& stack, float threshold) {
    if (stack.samples.size() < 2) throw Error("entropy_map: needs at least 2 samples");
    if (stack.samples.size() > 65535) throw Error("entropy_map: too many samples");
    const Image2D& first = stack.samples.front();
    std::vector<std::uint16_t> counts(first.data.size(), 0);
    const auto& k = kernels::active();
    for (const auto& s : stack.samples) {
        if (!s.same_shape(first)) throw Error("entropy_map: samples differ in shape");
        k.count_at_least(counts.data(), s.data.data(), counts.size(), threshold);
    }
    return counts;
}

}  // namespace

Image2D entropy_map(const McStack& stack, float binarize_threshold) {
    const auto counts = positive_frequencies(stack, binarize_threshold);
    const std::size_t n = stack.samples.size();
    std::vector<float> table(n + 1);
    for (std::size_t c = 0; c <= n; ++c)
        table[c] = static_cast<float>(bernoulli_entropy(static_cast<double>(c) / static_cast<double>(n)));
    Image2D out(stack.samples.front().nx, stack.samples.front().ny);
    for (std::size_t i = 0; i < counts.size(); ++i) out.data[i] = table[counts[i]];
    return out;
}

std::vector<std::uint8_t> union_mask(const McStack& stack, float binarize_threshold) {
    const auto counts = positive_frequencies(stack, binarize_threshold);
    std::vector<std::uint8_t> out(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) out[i] = counts[i] > 0 ? 1 : 0;
    return out;
}

UncertaintyReport summarize(const std::vector<Volume>& maps, const std::vector<Volume>& unions,
                            const std::vector<std::string>& image_ids) {
    if (maps.empty()) throw Error("summarize: no entropy maps");
    if (maps.size() != unions.size()) throw Error("summarize: entropy maps and union masks differ in count");
    if (!image_ids.empty() && image_ids.size() != maps.size()) throw Error("summarize: image id count mismatch");
    UncertaintyReport rep;
    double sum_union = 0.0, sum_all = 0.0;
    std::size_t n_union = 0;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        require_same_geometry(maps[i], unions[i], "summarize");
        auto h = maps[i].prob_values();
        auto u = unions[i].mask_values();
        double all = 0.0, on = 0.0;
        std::size_t cnt = 0;
        for (std::size_t v = 0; v < h.size(); ++v) {
            all += h[v];
            if (u[v]) {
                on += h[v];
                ++cnt;
            }
        }
        ImageUncertainty iu;
        iu.image_id = image_ids.empty() ? std::to_string(i) : image_ids[i];
        iu.mean_entropy_all = all / static_cast<double>(h.size());
        if (cnt) {
            iu.mean_entropy_union = on / static_cast<double>(cnt);
            sum_union += *iu.mean_entropy_union;
            ++n_union;
        }
        sum_all += iu.mean_entropy_all;
        rep.images.push_back(std::move(iu));
    }
    rep.scalar_mean_entropy_all = sum_all / static_cast<double>(maps.size());
    if (n_union) rep.scalar_mean_entropy_union = sum_union / static_cast<double>(n_union);
    return rep;
}

VolumeUncertainty volume_uncertainty(const Volume& image, const Predictor& predictor, const TtaConfig& config,
                                     const std::string& model_id, const std::string& image_id) {
    const Geometry& g = image.geometry();
    const std::size_t plane = g.nx() * g.ny();
    std::vector<float> entropy(g.voxel_count());
    std::vector<std::uint8_t> uni(g.voxel_count()), pred(g.voxel_count());
    TtaConfig per_slice = config;
    per_slice.threads = 1;
    parallel_for(g.nz(), config.threads, [&](std::size_t z) {
        const Image2D input = plane_of(image, z);
        PredictContext ctx{model_id, image_id, z, 0, false};
        const McStack stack = mc_predict(input, predictor, per_slice, ctx);
        const Image2D h = entropy_map(stack, config.binarize_threshold);
        const auto u = union_mask(stack, config.binarize_threshold);
        ctx.reference = true;
        const Image2D ref = predictor.predict(input, ctx);
        if (!ref.same_shape(input)) throw Error("predictor " + predictor.name() + " returned a wrong-shaped map");
        for (std::size_t i = 0; i < plane; ++i) {
            entropy[z * plane + i] = h.data[i];
            uni[z * plane + i] = u[i];
            pred[z * plane + i] = ref.data[i] >= config.binarize_threshold ? 1 : 0;
        }
    });
    return {Volume::probability(g, std::move(entropy)), Volume::mask(g, std::move(uni)),
            Volume::mask(g, std::move(pred))};
}

}  // namespace raterlab
