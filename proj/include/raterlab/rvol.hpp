#pragma once

// RVOL: a JSON sidecar header plus a raw little-endian, x-fastest voxel file.
//
//   {"format": "RVOL", "version": 1, "dims": [x, y, z], "spacing_mm": [x, y, z],
//    "dtype": "u8" | "f32", "kind": "mask" | "prob" | "image", "data": "name.raw"}
//
// "data" is resolved relative to the header; when absent the header path with
// its extension replaced by ".raw" is used. Masks are u8, everything else f32.

#include <filesystem>

#include "raterlab/volume.hpp"

namespace raterlab {

Volume load_volume(const std::filesystem::path& header_path);

/// Writes header and raw file atomically. The raw file is named after the
/// header with a ".raw" extension.
void save_volume(const std::filesystem::path& header_path, const Volume& v);

}  // namespace raterlab
