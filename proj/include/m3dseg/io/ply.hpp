#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "m3dseg/geometry/sampling.hpp"

namespace m3dseg::io {

using Rgb = std::array<std::uint8_t, 3>;

/// Color of part label i, i < 8.
std::span<const Rgb> palette();

/// ASCII PLY with x y z and red green blue per vertex. Throws ValidationError
/// when a label has no palette color.
std::string ply_text(std::span<const geometry::Point3f> points, std::span<const std::size_t> labels);
void write_ply(const std::filesystem::path& path, std::span<const geometry::Point3f> points,
               std::span<const std::size_t> labels);

struct PlyCloud {
  std::vector<std::array<double, 3>> points;
  std::vector<Rgb> colors;
};
/// Reads the ASCII subset written by ply_text; throws FormatError otherwise.
PlyCloud parse_ply(const std::string& text);

}  // namespace m3dseg::io
