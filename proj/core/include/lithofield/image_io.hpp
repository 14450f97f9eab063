#pragma once

#include <filesystem>
#include <iosfwd>

#include "lithofield/grid.hpp"

namespace lithofield {

/// Binary PGM (P5, maxval 255). Pixels >= 128 read as 1 (open), others 0.
RealGrid read_pgm_mask(std::istream& in);
RealGrid load_pgm_mask(const std::filesystem::path& path);

/// Writes a {0,1} grid as P5 with 0 -> 0 (absorber) and 1 -> 255 (open).
void write_pgm_mask(std::ostream& out, const RealGrid& mask);
void save_pgm_mask(const std::filesystem::path& path, const RealGrid& mask);

/// Greyscale PFM ("Pf"), little-endian (negative scale). Rows are stored
/// bottom-to-top per the format; grid row 0 is the top image row.
RealGrid read_pfm(std::istream& in);
RealGrid load_pfm(const std::filesystem::path& path);
void write_pfm(std::ostream& out, const RealGrid& image);
void save_pfm(const std::filesystem::path& path, const RealGrid& image);

}  // namespace lithofield
