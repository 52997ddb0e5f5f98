#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "raterlab/uncertainty.hpp"

namespace raterlab {

/// Exchanges planes with an external model through a directory:
///   <dir>/<model>/<image>/z<slice>_s<sample>_in.rvol    written by the harness
///   <dir>/<model>/<image>/z<slice>_s<sample>_pred.rvol  expected from the model
/// The untransformed reference call uses "ref" in place of s<sample>.
/// In export mode inputs are written and an all-zero map is returned.
class PrecomputedPredictor final : public Predictor {
public:
    explicit PrecomputedPredictor(std::filesystem::path dir, bool export_only = false)
        : dir_(std::move(dir)), export_only_(export_only) {}

    Image2D predict(const Image2D& input, const PredictContext& ctx) const override;
    std::string name() const override { return "precomputed:" + dir_.string(); }

    std::filesystem::path input_path(const PredictContext& ctx) const;
    std::filesystem::path prediction_path(const PredictContext& ctx) const;

private:
    std::filesystem::path dir_;
    bool export_only_;
};

/// Runs one process per call. Arguments may contain {in}, {out}, {model},
/// {image}, {slice} and {sample}; {in} and {out} are appended when absent.
/// The input is an RVOL "image" plane, the output must be an RVOL "prob" plane.
class SubprocessPredictor final : public Predictor {
public:
    explicit SubprocessPredictor(std::vector<std::string> argv);
    /// Splits on whitespace.
    static SubprocessPredictor from_command_line(const std::string& cmd);

    Image2D predict(const Image2D& input, const PredictContext& ctx) const override;
    std::string name() const override;

private:
    std::vector<std::string> argv_;
};

Volume plane_volume(const Image2D& img, VolumeKind kind);
Image2D image_of_plane_volume(const Volume& v);

}  // namespace raterlab
