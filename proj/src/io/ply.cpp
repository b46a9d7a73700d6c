#include "m3dseg/io/ply.hpp"

#include <cstdio>
#include <sstream>

#include "m3dseg/common/binary_io.hpp"

namespace m3dseg::io {

std::span<const Rgb> palette() {
  static constexpr std::array<Rgb, 8> kPalette{{{230, 25, 75},
                                                {60, 180, 75},
                                                {0, 130, 200},
                                                {255, 225, 25},
                                                {145, 30, 180},
                                                {245, 130, 48},
                                                {70, 240, 240},
                                                {128, 128, 128}}};
  return kPalette;
}

std::string ply_text(std::span<const geometry::Point3f> points, std::span<const std::size_t> labels) {
  if (points.size() != labels.size()) throw ValidationError("ply: point and label counts differ");
  const auto colors = palette();
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(points.size()) +
                    "\nproperty float x\nproperty float y\nproperty float z\n"
                    "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  char line[128];
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (labels[i] >= colors.size())
      throw ValidationError("ply: label " + std::to_string(labels[i]) + " has no palette color (max " +
                            std::to_string(colors.size() - 1) + ")");
    const Rgb& c = colors[labels[i]];
    std::snprintf(line, sizeof line, "%.9g %.9g %.9g %u %u %u\n", points[i][0], points[i][1], points[i][2],
                  unsigned{c[0]}, unsigned{c[1]}, unsigned{c[2]});
    out += line;
  }
  return out;
}

void write_ply(const std::filesystem::path& path, std::span<const geometry::Point3f> points,
               std::span<const std::size_t> labels) {
  write_text(path, ply_text(points, labels));
}

PlyCloud parse_ply(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "ply") throw FormatError("ply: missing 'ply' magic line");
  if (!std::getline(in, line) || line != "format ascii 1.0") throw FormatError("ply: expected ascii 1.0 format");
  std::size_t n = 0;
  bool have_count = false;
  while (std::getline(in, line) && line != "end_header") {
    std::istringstream ls(line);
    std::string kw, element;
    ls >> kw;
    if (kw == "element" && (ls >> element) && element == "vertex") have_count = static_cast<bool>(ls >> n);
  }
  if (line != "end_header" || !have_count) throw FormatError("ply: incomplete header");
  PlyCloud cloud;
  for (std::size_t i = 0; i < n; ++i) {
    double x, y, z;
    unsigned r, g, b;
    if (!(in >> x >> y >> z >> r >> g >> b) || r > 255 || g > 255 || b > 255)
      throw FormatError("ply: bad vertex " + std::to_string(i));
    cloud.points.push_back({x, y, z});
    cloud.colors.push_back({static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)});
  }
  return cloud;
}

}  // namespace m3dseg::io
