#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "raterlab/volume.hpp"

namespace raterlab {

/// Dense 2D float grid, x-fastest.
struct Image2D {
    std::size_t nx = 0;
    std::size_t ny = 0;
    std::vector<float> data;

    Image2D() = default;
    Image2D(std::size_t w, std::size_t h, float fill = 0.0f) : nx(w), ny(h), data(w * h, fill) {}

    float& at(std::size_t x, std::size_t y) { return data[x + nx * y]; }
    float at(std::size_t x, std::size_t y) const { return data[x + nx * y]; }
    bool same_shape(const Image2D& o) const { return nx == o.nx && ny == o.ny; }
    bool operator==(const Image2D&) const = default;
};

/// Slice z of any volume as floats.
Image2D plane_of(const Volume& v, std::size_t z);

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

/// Sampling ranges for test-time augmentation. Translation applies the same
/// range independently to x and y.
struct TtaRanges {
    Range rotation_deg;
    Range translation_px;
    Range scale{1.0, 1.0};

    /// +-rot degrees, +-trans pixels, 1 +- scale.
    static TtaRanges symmetric(double rot_deg, double trans_px, double scale);
    void validate() const;
};

/// In-plane similarity transform about the image centre:
/// p' = c + scale * R(rotation) * (p - c) + translation.
struct TtaTransform {
    double rotation_deg = 0.0;
    std::array<double, 2> translation{0.0, 0.0};
    double scale = 1.0;

    TtaTransform inverse() const;
    std::array<double, 2> apply(std::array<double, 2> p, std::array<double, 2> centre) const;
    /// Largest displacement of any pixel of an nx x ny image.
    double max_displacement(std::size_t nx, std::size_t ny) const;
};

/// Uniform draw for every component, in the order rotation, tx, ty, scale.
TtaTransform sample_transform(const TtaRanges& ranges, std::mt19937_64& rng);

enum class Interp { Bilinear, Nearest };

/// Warps `plane` by `t` (output pixel p reads the input at t^-1(p)). Reads
/// outside the grid are 0.
Image2D apply_transform(const Image2D& plane, const TtaTransform& t, Interp interp);

/// Identifies one predictor call, so file- and process-backed predictors can
/// name their inputs and outputs.
struct PredictContext {
    std::string model_id;
    std::string image_id;
    std::size_t slice = 0;
    std::size_t sample = 0;
    bool reference = false;  // untransformed call used for Dice
};

/// Maps a grayscale plane to a same-shaped probability map in [0, 1],
/// deterministically for a fixed input. Implementations must be safe to call
/// concurrently.
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual Image2D predict(const Image2D& input, const PredictContext& ctx) const = 0;
    virtual std::string name() const = 0;
};

struct McStack {
    std::vector<Image2D> samples;  // draw order
    std::vector<TtaTransform> transforms;
    std::size_t n_samples() const { return samples.size(); }
};

struct TtaConfig {
    std::size_t n_samples = 10;
    TtaRanges ranges = TtaRanges::symmetric(10.0, 3.0, 0.02);
    std::uint64_t seed = 1234;
    float binarize_threshold = 0.5f;
    std::size_t threads = 1;
};

/// Seed of the RNG stream for one Monte-Carlo draw.
std::uint64_t sample_stream_seed(std::uint64_t seed, const std::string& image_id, std::size_t slice,
                                 std::size_t sample);

/// For each draw: sample a transform, warp the input (bilinear), predict,
/// warp the prediction back with the inverse (bilinear). Draws use
/// independent RNG streams so the stack does not depend on `threads`.
McStack mc_predict(const Image2D& plane, const Predictor& predictor, const TtaConfig& config,
                   const PredictContext& ctx);

/// Bernoulli entropy in nats, 0 at f = 0 and f = 1.
double bernoulli_entropy(double f);

/// Per voxel: f = fraction of samples >= threshold, H(f).
Image2D entropy_map(const McStack& stack, float binarize_threshold = 0.5f);
/// Voxels positive in at least one binarized sample.
std::vector<std::uint8_t> union_mask(const McStack& stack, float binarize_threshold = 0.5f);

struct ImageUncertainty {
    std::string image_id;
    std::optional<double> mean_entropy_union;  // unset when the union is empty
    double mean_entropy_all = 0.0;
};

struct UncertaintyReport {
    std::vector<ImageUncertainty> images;
    std::optional<double> scalar_mean_entropy_union;  // mean over images with a nonempty union
    double scalar_mean_entropy_all = 0.0;
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
    std::string entropy_unit = "nats";
};

/// Entropy maps (prob volumes) with their union masks, one pair per image.
UncertaintyReport summarize(const std::vector<Volume>& entropy_maps, const std::vector<Volume>& union_masks,
                            const std::vector<std::string>& image_ids = {});

struct VolumeUncertainty {
    Volume entropy;      // nats, per voxel
    Volume union_mask;   // positive in >= 1 binarized sample
    Volume prediction;   // untransformed prediction binarized at the threshold
};

/// Slice-wise TTA over a whole volume.
VolumeUncertainty volume_uncertainty(const Volume& image, const Predictor& predictor, const TtaConfig& config,
                                     const std::string& model_id, const std::string& image_id);

}  // namespace raterlab
