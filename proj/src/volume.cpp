#include "raterlab/volume.hpp"

#include <cmath>
#include <sstream>

#include "raterlab/error.hpp"

namespace raterlab {

Geometry::Geometry(std::array<std::size_t, 3> d, std::array<double, 3> s) : dims(d), spacing(s) {
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 1) throw Error("geometry: dims must be >= 1 on every axis");
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
            throw Error("geometry: spacing must be finite and > 0 on every axis");
    }
}

std::string to_string(const Geometry& g) {
    std::ostringstream os;
    os << g.dims[0] << "x" << g.dims[1] << "x" << g.dims[2] << " @ " << g.spacing[0] << ","
       << g.spacing[1] << "," << g.spacing[2] << "mm";
    return os.str();
}

Volume Volume::mask(Geometry g, std::vector<std::uint8_t> values) {
    if (values.size() != g.voxel_count())
        throw Error("volume: value count " + std::to_string(values.size()) + " does not match " + to_string(g));
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i] > 1)
            throw Error("volume: non-binary value " + std::to_string(values[i]) + " at voxel " + std::to_string(i));
    return Volume(g, VolumeKind::BinaryMask, std::move(values));
}

Volume Volume::probability(Geometry g, std::vector<float> values) {
    if (values.size() != g.voxel_count())
        throw Error("volume: value count " + std::to_string(values.size()) + " does not match " + to_string(g));
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!(values[i] >= 0.0f && values[i] <= 1.0f))
            throw Error("volume: probability value out of [0,1] at voxel " + std::to_string(i));
    return Volume(g, VolumeKind::ProbabilityMap, std::move(values));
}

Volume Volume::intensity(Geometry g, std::vector<float> values) {
    if (values.size() != g.voxel_count())
        throw Error("volume: value count " + std::to_string(values.size()) + " does not match " + to_string(g));
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!std::isfinite(values[i])) throw Error("volume: non-finite intensity at voxel " + std::to_string(i));
    return Volume(g, VolumeKind::Intensity, std::move(values));
}

Volume Volume::zeros_mask(Geometry g) {
    return Volume(g, VolumeKind::BinaryMask, std::vector<std::uint8_t>(g.voxel_count(), 0));
}

std::span<const std::uint8_t> Volume::mask_values() const {
    if (kind_ != VolumeKind::BinaryMask) throw Error("volume: expected a binary mask");
    return std::get<std::vector<std::uint8_t>>(values_);
}

std::span<const float> Volume::prob_values() const {
    if (kind_ == VolumeKind::BinaryMask) throw Error("volume: expected float voxels, got a binary mask");
    return std::get<std::vector<float>>(values_);
}

double Volume::value(std::size_t i) const {
    if (kind_ == VolumeKind::BinaryMask) return std::get<std::vector<std::uint8_t>>(values_).at(i);
    return std::get<std::vector<float>>(values_).at(i);
}

void require_same_geometry(const Volume& a, const Volume& b, const char* what) {
    if (a.geometry() != b.geometry())
        throw GeometryMismatch(std::string(what) + ": geometry mismatch (" + to_string(a.geometry()) + " vs " +
                               to_string(b.geometry()) + ")");
}

void require_same_geometry(std::span<const Volume> volumes, const char* what) {
    for (std::size_t i = 1; i < volumes.size(); ++i) require_same_geometry(volumes[0], volumes[i], what);
}

}  // namespace raterlab
