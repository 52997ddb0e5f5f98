#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "raterlab/volume.hpp"

namespace raterlab {

/// Number of voxels equal to 1 in a binary mask.
std::uint64_t positive_count(const Volume& mask);

/// Nearest-neighbour resampling onto a grid with `target_spacing`. Output
/// dims are round(dim * spacing / target) clamped to >= 1; every output voxel
/// copies the input voxel whose extent contains the output voxel centre
/// (ties resolve towards the higher index).
Volume resample_nn(const Volume& v, std::array<double, 3> target_spacing);

/// Crops x/y to `target_xy`, keeping all slices. The window starts at
/// floor((src - target) / 2) on each axis.
Volume center_crop(const Volume& v, std::array<std::size_t, 2> target_xy);

/// One single-slice volume per z, ascending.
std::vector<Volume> slices(const Volume& v);
/// Inverse of slices(); the output spacing along z is `z_spacing`.
Volume stack_slices(const std::vector<Volume>& planes, double z_spacing);

}  // namespace raterlab
