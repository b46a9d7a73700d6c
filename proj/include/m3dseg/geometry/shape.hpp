#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "m3dseg/numerics/random.hpp"

namespace m3dseg::geometry {

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Vec3 {
  double x = 0, y = 0, z = 0;

  double operator[](int axis) const { return axis == 0 ? x : axis == 1 ? y : z; }
  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(Vec3, Vec3) = default;
};

/// Axis-aligned box.
struct Box {
  Vec3 center;
  Vec3 half;
  friend bool operator==(const Box&, const Box&) = default;
};

/// Solid cylinder along a coordinate axis (0 = x, 1 = y, 2 = z).
struct Cylinder {
  Vec3 center;
  int axis = 1;
  double radius = 0;
  double half_length = 0;
  friend bool operator==(const Cylinder&, const Cylinder&) = default;
};

/// Solid torus whose ring lies in the plane normal to `axis`.
struct Torus {
  Vec3 center;
  int axis = 2;
  double major = 0;
  double minor = 0;
  friend bool operator==(const Torus&, const Torus&) = default;
};

struct Sphere {
  Vec3 center;
  double radius = 0;
  friend bool operator==(const Sphere&, const Sphere&) = default;
};

using Solid = std::variant<Box, Cylinder, Torus, Sphere>;

/// Implicit function of a solid: <= 0 inside, > 0 outside.
double implicit(const Solid& s, Vec3 p);
double surface_area(const Solid& s);
/// Uniform sample on the solid's boundary.
Vec3 sample_boundary(const Solid& s, numerics::RandomStream& rng);

/// One semantic part: the union of its solids.
struct Part {
  std::string name;
  std::vector<Solid> solids;

  bool contains(Vec3 p, double tolerance = 0.0) const;
  friend bool operator==(const Part&, const Part&) = default;
};

enum class Category { table, chair, mug, airplane_toy };

std::string_view category_name(Category c);
Category parse_category(std::string_view name);
std::span<const Category> all_categories();

/// Part names produced by the generator for a category, in label order.
std::vector<std::string> category_part_names(Category c);

/// Named geometric parameters of a generated shape.
using ShapeParams = std::map<std::string, double>;

struct ParamRange {
  std::string_view name;
  double lo, hi;
};

/// Documented sampling range of every parameter of a category.
///
/// table:        top_height [0.30, 0.48] (y of the top surface), top_thickness
///               [0.08, 0.14], top_half_x [0.30, 0.45], top_half_z [0.25, 0.40],
///               leg_radius [0.045, 0.07], leg_inset [0.02, 0.08]
/// chair:        seat_height [-0.05, 0.08], seat_thickness [0.08, 0.12],
///               seat_half [0.25, 0.35], back_height [0.22, 0.32],
///               back_thickness [0.08, 0.12], leg_radius [0.045, 0.06]
/// mug:          body_radius [0.22, 0.30], body_half_height [0.25, 0.35],
///               handle_major [0.12, 0.16], handle_minor [0.045, 0.065]
/// airplane_toy: fuselage_radius [0.07, 0.10], fuselage_half_length [0.38, 0.45],
///               wing_half_span [0.35, 0.45], wing_half_chord [0.08, 0.12],
///               wing_half_thickness [0.03, 0.045], tail_height [0.12, 0.20],
///               tail_half_chord [0.06, 0.08]
std::span<const ParamRange> param_ranges(Category c);

/// Draws every parameter uniformly from its range.
ShapeParams sample_params(Category c, std::uint64_t seed);
/// Throws GeometryError on missing, unknown or out-of-range parameters.
void validate_params(Category c, const ShapeParams& params);

/// A procedural solid with analytic occupancy and labeled parts. Parts may
/// overlap; a point inside several parts takes the lowest part index.
class LabeledShape {
 public:
  LabeledShape() = default;
  LabeledShape(Category category, std::vector<Part> parts, std::uint64_t seed = 0,
               ShapeParams params = {});

  Category category() const { return category_; }
  std::uint64_t seed() const { return seed_; }
  const ShapeParams& params() const { return params_; }
  const std::vector<Part>& parts() const { return parts_; }
  std::size_t part_count() const { return parts_.size(); }
  std::vector<std::string> part_names() const;

  /// Union of the part predicates.
  bool inside(Vec3 p) const;
  /// Lowest index of a part containing `p` (within `tolerance`).
  std::optional<std::size_t> part_at(Vec3 p, double tolerance = 0.0) const;

  friend bool operator==(const LabeledShape& a, const LabeledShape& b);

 private:
  Category category_ = Category::table;
  std::vector<Part> parts_;
  std::uint64_t seed_ = 0;
  ShapeParams params_;
};

LabeledShape generate_shape(Category c, std::uint64_t seed, const ShapeParams& params);
/// Parameters drawn with sample_params(c, seed).
LabeledShape generate_shape(Category c, std::uint64_t seed);

}  // namespace m3dseg::geometry
