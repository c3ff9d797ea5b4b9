#pragma once

#include <string>

#include "stratus/geometry.hpp"

namespace stratus {

// Grid file format: one plain-text header line
//   W H CELL_KM OX OY FLIP TIMESTAMP
// followed by W*H little-endian IEEE-754 32-bit floats, row-major.
// Mask files use the same header (TIMESTAMP "-") with one 0/1 byte per cell.
void write_raster(const std::string& path, const Raster& r, UtcTime timestamp);
Raster read_raster(const std::string& path, UtcTime* timestamp_out = nullptr);

void write_mask(const std::string& path, const Mask& m);
Mask read_mask(const std::string& path);

} // namespace stratus
