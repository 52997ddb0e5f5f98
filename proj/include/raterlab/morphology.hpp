#pragma once

#include "raterlab/volume.hpp"

namespace raterlab::morph {

// Binary morphology with the 6-connected (face) structuring element. Axes of
// extent 1 carry no neighbours, so a single-slice volume gets the 2D
// 4-connected element. Out-of-bounds voxels count as background.

Volume dilate(const Volume& mask, int steps = 1);
Volume erode(const Volume& mask, int steps = 1);

/// steps > 0 dilates, steps < 0 erodes. Erosion stops early if the next step
/// would empty a nonempty mask. `applied` receives the signed steps done.
Volume dilate_or_erode_clamped(const Volume& mask, int steps, int* applied = nullptr);

/// Positive voxels with at least one non-positive face neighbour.
Volume inner_boundary(const Volume& mask);
/// Background voxels with at least one positive face neighbour.
Volume outer_boundary(const Volume& mask);

}  // namespace raterlab::morph
