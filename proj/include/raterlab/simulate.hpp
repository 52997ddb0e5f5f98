#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "raterlab/manifest.hpp"
#include "raterlab/uncertainty.hpp"
#include "raterlab/volume.hpp"

namespace raterlab {

/// Parametric rater: signed morphological steps (dilate > 0, erode < 0)
/// drawn per image from Normal(center_style + rater_offset, jitter_sigma)
/// and rounded, followed by independent flips of boundary-band voxels.
using RaterModel = RaterRecord;

void validate_rater_model(const RaterModel& m);
/// Accepts a JSON array of rater rows or an object with a "raters" array.
std::vector<RaterModel> parse_rater_models(const std::string& json_text);

struct PhantomConfig {
    Geometry geometry{{64, 64, 8}, {1.0, 1.0, 1.0}};
    int n_objects = 3;
    Range radius_mm{5.0, 9.0};   // per-axis semi-axis, clamped to fit the grid
    double noise_sigma = 0.05;   // additive Gaussian noise on the intensity
    int supersample = 3;         // partial-volume samples per axis
};

struct Ellipsoid {
    std::array<std::size_t, 3> centre_voxel{};
    std::array<double, 3> radii_mm{};
};

struct Phantom {
    Volume true_mask;
    Volume intensity;  // partial-volume fraction plus noise
    std::vector<Ellipsoid> objects;
};

/// Ellipsoids are centred on voxel centres; a voxel belongs to an object when
/// its centre satisfies sum(((p - c) / r)^2) <= 1. Objects keep a one-voxel
/// gap between bounding boxes; placement is retried a bounded number of times.
Phantom generate_phantom(const PhantomConfig& config, std::uint64_t seed);

Volume simulate_rater(const Phantom& phantom, const RaterModel& model, std::uint64_t seed);

/// Moves the boundary of every slice in-plane by `px` pixels (> 0 grows,
/// < 0 shrinks): a pixel is kept when its signed Euclidean distance to the
/// slice boundary is <= px. Objects thinner than the shrink vanish.
Volume shift_boundary(const Volume& mask, double px);

/// Shift b on the half-step grid +-(k + 1/2) * step within [-max_px, max_px] minimising
/// sum |n(shift_boundary(truth, b)) - n(target)|; ties go to the smaller |b|,
/// then to the negative side.
double fit_boundary_shift(const std::vector<Volume>& truths, const std::vector<Volume>& targets, double max_px = 10.0,
                          double step = 0.25);

struct SyntheticParams {
    double sigma = 1.0;       // noisy_boundary: edge jitter amplitude, pixels
    double bias_px = 0.0;     // biased: in-plane boundary shift
    double sigma_base = 2.0;  // biased: jitter amplitude at bias_px = 0
    double sigma_gain = 0.4;  // biased: amplitude = sigma_base * exp(sigma_gain * bias_px)
};

/// Synthetic stand-ins for trained models, all driven by the input plane:
///   oracle          smoothed segmentation of the input intensity
///   noisy_boundary  soft-edged oracle segmentation whose edge is displaced per pixel by
///                   input-hashed noise of up to sigma pixels
///   biased          noisy_boundary with the edge shifted by bias_px and a noise amplitude
///                   growing with bias_px
std::unique_ptr<Predictor> synthetic_predictor(const std::string& name, const SyntheticParams& params = {});
double biased_sigma(const SyntheticParams& params);

struct CohortConfig {
    PhantomConfig phantom;
    std::size_t n_subjects = 20;
    std::vector<RaterModel> raters;
    std::uint64_t seed = 7;
};

struct CohortSubject {
    std::string subject_id;
    Phantom phantom;
    std::vector<Volume> rater_masks;  // aligned with CohortConfig::raters
};

struct Cohort {
    CohortConfig config;
    std::vector<CohortSubject> subjects;
};

Cohort generate_cohort(const CohortConfig& config, std::size_t threads = 1);

/// Writes masks, truth and intensity volumes plus manifest.json under
/// out_dir and returns the manifest.
DatasetManifest write_cohort(const Cohort& cohort, const std::filesystem::path& out_dir);

/// Seven raters in three centres (4-2-1).
std::vector<RaterModel> paper_shape_raters();

}  // namespace raterlab
