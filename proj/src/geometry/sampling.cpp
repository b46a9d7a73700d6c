#include "m3dseg/geometry/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace m3dseg::geometry {

OccupancyGrid::OccupancyGrid(std::uint32_t resolution)
    : resolution_(resolution),
      values_(static_cast<std::size_t>(resolution) * resolution * resolution, 0) {}

OccupancyGrid::OccupancyGrid(std::uint32_t resolution, std::vector<std::uint8_t> values)
    : resolution_(resolution), values_(std::move(values)) {
  const std::size_t expected = static_cast<std::size_t>(resolution) * resolution * resolution;
  if (values_.size() != expected)
    throw GeometryError("grid of resolution " + std::to_string(resolution) + " needs " +
                        std::to_string(expected) + " cells, got " + std::to_string(values_.size()));
  for (auto v : values_)
    if (v > 1) throw GeometryError("grid cells must be 0 or 1");
}

double cell_coordinate(std::uint32_t i, std::uint32_t resolution) {
  return (static_cast<double>(i) + 0.5) / static_cast<double>(resolution) - 0.5;
}

Vec3 OccupancyGrid::cell_center(std::size_t cell) const {
  const std::size_t r = resolution_;
  const auto i = static_cast<std::uint32_t>(cell / (r * r));
  const auto j = static_cast<std::uint32_t>((cell / r) % r);
  const auto k = static_cast<std::uint32_t>(cell % r);
  return {cell_coordinate(i, resolution_), cell_coordinate(j, resolution_), cell_coordinate(k, resolution_)};
}

std::size_t OccupancyGrid::inside_count() const {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

OccupancyGrid voxelize(const LabeledShape& shape, std::uint32_t resolution) {
  if (resolution < 2) throw GeometryError("resolution must be >= 2, got " + std::to_string(resolution));
  OccupancyGrid grid(resolution);
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    const std::size_t r = resolution;
    grid.set(static_cast<std::uint32_t>(c / (r * r)), static_cast<std::uint32_t>((c / r) % r),
             static_cast<std::uint32_t>(c % r), shape.inside(grid.cell_center(c)));
  }
  return grid;
}

PointCloud PointCloud::prefix(std::size_t n) const {
  if (n > points.size())
    throw GeometryError("requested " + std::to_string(n) + " points from a cloud of " +
                        std::to_string(points.size()));
  PointCloud out;
  out.points.assign(points.begin(), points.begin() + static_cast<std::ptrdiff_t>(n));
  if (has_labels()) out.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

void PointCloud::validate() const {
  if (has_labels() && labels.size() != points.size())
    throw GeometryError("cloud has " + std::to_string(points.size()) + " points but " +
                        std::to_string(labels.size()) + " labels");
  for (const Point3f& p : points)
    for (float c : p)
      if (!(c >= -0.5f && c <= 0.5f)) throw GeometryError("point coordinate outside [-0.5, 0.5]");
}

namespace {

constexpr double kSurfaceTolerance = 1e-9;

float to_cube(double v) { return std::clamp(static_cast<float>(v), -0.5f, 0.5f); }

}  // namespace

std::size_t label_surface_point(const LabeledShape& shape, const Point3f& point) {
  const Vec3 p = to_vec3(point);
  if (auto part = shape.part_at(p, kLabelTolerance)) return *part;
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < shape.part_count(); ++i)
    for (const Solid& s : shape.parts()[i].solids) {
      const double d = implicit(s, p);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
  return best;
}

PointCloud sample_surface_points(const LabeledShape& shape, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw GeometryError("point count must be >= 1");
  struct Entry {
    const Solid* solid;
    std::size_t part;
  };
  std::vector<Entry> solids;
  std::vector<double> cumulative;
  double total = 0.0;
  for (std::size_t p = 0; p < shape.part_count(); ++p)
    for (const Solid& s : shape.parts()[p].solids) {
      total += surface_area(s);
      solids.push_back({&s, p});
      cumulative.push_back(total);
    }
  if (!(total > 0.0)) throw GeometryError("degenerate shape: zero surface area");

  numerics::RandomStream rng(seed, "surface");
  PointCloud cloud;
  cloud.points.reserve(n);
  cloud.labels.reserve(n);
  const std::size_t max_attempts = 1000 * n + 10000;
  for (std::size_t attempt = 0; cloud.size() < n; ++attempt) {
    if (attempt >= max_attempts) throw GeometryError("degenerate shape: boundary is fully enclosed");
    const double u = rng.uniform() * total;
    const std::size_t pick = std::min<std::size_t>(
        static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin()),
        solids.size() - 1);
    const Vec3 p = sample_boundary(*solids[pick].solid, rng);
    bool buried = false;
    for (std::size_t s = 0; s < solids.size() && !buried; ++s)
      buried = s != pick && implicit(*solids[s].solid, p) < -kSurfaceTolerance;
    if (buried) continue;
    const Point3f stored{to_cube(p.x), to_cube(p.y), to_cube(p.z)};
    cloud.points.push_back(stored);
    cloud.labels.push_back(static_cast<std::uint16_t>(label_surface_point(shape, stored)));
  }
  return cloud;
}

std::vector<OccupancySample> sample_occupancy_pairs(const LabeledShape& shape, const OccupancyGrid& grid) {
  std::vector<OccupancySample> samples;
  samples.reserve(grid.cell_count());
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    const Vec3 p = grid.cell_center(c);
    const std::uint8_t y = shape.inside(p) ? 1 : 0;
    if (y != grid.values()[c]) throw GeometryError("grid is inconsistent with shape at cell " + std::to_string(c));
    samples.push_back({p, y});
  }
  return samples;
}

}  // namespace m3dseg::geometry
