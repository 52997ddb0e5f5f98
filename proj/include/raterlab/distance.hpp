#pragma once

#include <cstddef>
#include <vector>

#include "raterlab/volume.hpp"

namespace raterlab {

/// Exact squared Euclidean distance (mm^2, honouring spacing) from every voxel
/// to the nearest feature voxel; infinity when there are no features.
std::vector<double> squared_distance_map(const Geometry& g, const std::vector<std::size_t>& features);

}  // namespace raterlab
