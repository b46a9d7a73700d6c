#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "m3dseg/geometry/shape.hpp"

namespace m3dseg::geometry {

/// R³ binary occupancy of the cube [-0.5, 0.5]³. Cell (i, j, k) indexes
/// (x, y, z) and is stored at (i * R + j) * R + k.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  explicit OccupancyGrid(std::uint32_t resolution);
  OccupancyGrid(std::uint32_t resolution, std::vector<std::uint8_t> values);

  std::uint32_t resolution() const { return resolution_; }
  std::size_t cell_count() const { return values_.size(); }
  const std::vector<std::uint8_t>& values() const { return values_; }

  std::size_t index(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
    return (static_cast<std::size_t>(i) * resolution_ + j) * resolution_ + k;
  }
  std::uint8_t at(std::uint32_t i, std::uint32_t j, std::uint32_t k) const { return values_[index(i, j, k)]; }
  void set(std::uint32_t i, std::uint32_t j, std::uint32_t k, bool inside) { values_[index(i, j, k)] = inside ? 1 : 0; }

  /// Center of the cell with linear index `cell`.
  Vec3 cell_center(std::size_t cell) const;
  std::size_t inside_count() const;

  friend bool operator==(const OccupancyGrid&, const OccupancyGrid&) = default;

 private:
  std::uint32_t resolution_ = 0;
  std::vector<std::uint8_t> values_;
};

/// Coordinate of the center of cell `i` along one axis.
double cell_coordinate(std::uint32_t i, std::uint32_t resolution);

/// Throws GeometryError when resolution < 2.
OccupancyGrid voxelize(const LabeledShape& shape, std::uint32_t resolution);

using Point3f = std::array<float, 3>;

struct PointCloud {
  std::vector<Point3f> points;
  /// Empty or one label per point.
  std::vector<std::uint16_t> labels;

  std::size_t size() const { return points.size(); }
  bool has_labels() const { return !labels.empty(); }
  /// The first n points (and labels).
  PointCloud prefix(std::size_t n) const;
  /// Throws GeometryError on out-of-cube coordinates or a label count mismatch.
  void validate() const;

  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

inline Vec3 to_vec3(const Point3f& p) { return {p[0], p[1], p[2]}; }

/// Distance within which a stored surface point counts as inside a part.
inline constexpr double kLabelTolerance = 1e-6;

/// Lowest part index containing `point` within kLabelTolerance, else the part
/// with the smallest implicit value.
std::size_t label_surface_point(const LabeledShape& shape, const Point3f& point);

/// Area-weighted samples on the boundary of the union of the shape's solids,
/// each labeled with the lowest part index containing it.
PointCloud sample_surface_points(const LabeledShape& shape, std::size_t n, std::uint64_t seed);

struct OccupancySample {
  Vec3 point;
  std::uint8_t label = 0;
};

/// One sample per grid cell center, in cell order.
std::vector<OccupancySample> sample_occupancy_pairs(const LabeledShape& shape, const OccupancyGrid& grid);

}  // namespace m3dseg::geometry
