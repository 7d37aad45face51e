#pragma once

#include <string>

#include "assembloid/geometry.hpp"

namespace assembloid {

enum class PlyFormat { ascii, binary_little_endian };

// Writes x/y/z as double properties so clouds round-trip losslessly.
void write_ply(const std::string& path, const PointCloud& cloud,
               PlyFormat format = PlyFormat::binary_little_endian);

// Reads ascii or binary_little_endian PLY with float or double x/y/z.
// Extra vertex properties are skipped; non-vertex elements are ignored.
PointCloud read_ply(const std::string& path);

}  // namespace assembloid
