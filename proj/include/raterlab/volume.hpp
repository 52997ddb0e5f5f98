#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace raterlab {

/// Voxel grid extent and voxel size (mm). Axis order is x, y, z.
struct Geometry {
    std::array<std::size_t, 3> dims{1, 1, 1};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};

    Geometry() = default;
    Geometry(std::array<std::size_t, 3> d, std::array<double, 3> s);

    std::size_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }
    std::size_t nx() const { return dims[0]; }
    std::size_t ny() const { return dims[1]; }
    std::size_t nz() const { return dims[2]; }
    std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
        return x + dims[0] * (y + dims[1] * z);
    }

    bool operator==(const Geometry&) const = default;
};

std::string to_string(const Geometry& g);

/// Intensity holds arbitrary finite reals (predictor inputs).
enum class VolumeKind { BinaryMask, ProbabilityMap, Intensity };

/// Immutable dense voxel grid, x-fastest. Binary masks are stored as bytes
/// holding 0 or 1, probability maps as floats in [0, 1].
class Volume {
public:
    Volume() = default;

    static Volume mask(Geometry g, std::vector<std::uint8_t> values);
    static Volume probability(Geometry g, std::vector<float> values);
    static Volume intensity(Geometry g, std::vector<float> values);
    static Volume zeros_mask(Geometry g);

    const Geometry& geometry() const { return geometry_; }
    VolumeKind kind() const { return kind_; }
    bool is_mask() const { return kind_ == VolumeKind::BinaryMask; }
    std::size_t size() const { return geometry_.voxel_count(); }

    /// Throws if the volume is not a binary mask.
    std::span<const std::uint8_t> mask_values() const;
    /// Float storage of probability maps and intensity volumes; throws for masks.
    std::span<const float> prob_values() const;

    double value(std::size_t i) const;
    double value(std::size_t x, std::size_t y, std::size_t z) const {
        return value(geometry_.index(x, y, z));
    }

    bool operator==(const Volume&) const = default;

private:
    Volume(Geometry g, VolumeKind k, std::variant<std::vector<std::uint8_t>, std::vector<float>> v)
        : geometry_(g), kind_(k), values_(std::move(v)) {}

    Geometry geometry_;
    VolumeKind kind_ = VolumeKind::BinaryMask;
    std::variant<std::vector<std::uint8_t>, std::vector<float>> values_;
};

/// Throws GeometryMismatch unless every volume shares the first one's geometry.
void require_same_geometry(std::span<const Volume> volumes, const char* what);
void require_same_geometry(const Volume& a, const Volume& b, const char* what);

}  // namespace raterlab
