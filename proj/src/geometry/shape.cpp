#include "m3dseg/geometry/shape.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace m3dseg::geometry {

namespace {

constexpr double kPi = std::numbers::pi;

// Point with coordinate `along` on `axis` and (a, b) on the remaining axes in
// increasing axis order.
Vec3 from_axis(int axis, double along, double a, double b) {
  switch (axis) {
    case 0: return {along, a, b};
    case 1: return {a, along, b};
    default: return {a, b, along};
  }
}

std::array<int, 2> other_axes(int axis) {
  switch (axis) {
    case 0: return {1, 2};
    case 1: return {0, 2};
    default: return {0, 1};
  }
}

struct ImplicitVisitor {
  Vec3 p;
  double operator()(const Box& b) const {
    const Vec3 d = p - b.center;
    return std::max({std::abs(d.x) - b.half.x, std::abs(d.y) - b.half.y, std::abs(d.z) - b.half.z});
  }
  double operator()(const Cylinder& c) const {
    const Vec3 d = p - c.center;
    const auto [a, b] = other_axes(c.axis);
    const double radial = std::hypot(d[a], d[b]) - c.radius;
    const double axial = std::abs(d[c.axis]) - c.half_length;
    return std::max(radial, axial);
  }
  double operator()(const Torus& t) const {
    const Vec3 d = p - t.center;
    const auto [a, b] = other_axes(t.axis);
    const double q = std::hypot(d[a], d[b]) - t.major;
    return std::hypot(q, d[t.axis]) - t.minor;
  }
  double operator()(const Sphere& s) const {
    const Vec3 d = p - s.center;
    return std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z) - s.radius;
  }
};

struct AreaVisitor {
  double operator()(const Box& b) const {
    return 8.0 * (b.half.x * b.half.y + b.half.y * b.half.z + b.half.x * b.half.z);
  }
  double operator()(const Cylinder& c) const {
    return 4.0 * kPi * c.radius * c.half_length + 2.0 * kPi * c.radius * c.radius;
  }
  double operator()(const Torus& t) const { return 4.0 * kPi * kPi * t.major * t.minor; }
  double operator()(const Sphere& s) const { return 4.0 * kPi * s.radius * s.radius; }
};

struct SampleVisitor {
  numerics::RandomStream& rng;

  Vec3 operator()(const Box& b) const {
    const std::array<double, 3> face_area{b.half.y * b.half.z, b.half.x * b.half.z,
                                          b.half.x * b.half.y};
    const double total = face_area[0] + face_area[1] + face_area[2];
    double u = rng.uniform() * total;
    int axis = 0;
    while (axis < 2 && u >= face_area[static_cast<std::size_t>(axis)]) {
      u -= face_area[static_cast<std::size_t>(axis)];
      ++axis;
    }
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const auto [a, c] = other_axes(axis);
    const double ua = rng.uniform(-b.half[a], b.half[a]);
    const double uc = rng.uniform(-b.half[c], b.half[c]);
    return b.center + from_axis(axis, sign * b.half[axis], ua, uc);
  }

  Vec3 operator()(const Cylinder& c) const {
    const double lateral = 4.0 * kPi * c.radius * c.half_length;
    const double cap = kPi * c.radius * c.radius;
    const double u = rng.uniform() * (lateral + 2.0 * cap);
    const double angle = rng.uniform(0.0, 2.0 * kPi);
    if (u < lateral) {
      const double along = rng.uniform(-c.half_length, c.half_length);
      return c.center +
             from_axis(c.axis, along, c.radius * std::cos(angle), c.radius * std::sin(angle));
    }
    const double r = c.radius * std::sqrt(rng.uniform());
    const double along = u < lateral + cap ? -c.half_length : c.half_length;
    return c.center + from_axis(c.axis, along, r * std::cos(angle), r * std::sin(angle));
  }

  Vec3 operator()(const Torus& t) const {
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    double theta = 0.0;
    // Area element is proportional to (R + r cos theta).
    do {
      theta = rng.uniform(0.0, 2.0 * kPi);
    } while (rng.uniform() * (t.major + t.minor) > t.major + t.minor * std::cos(theta));
    const double ring = t.major + t.minor * std::cos(theta);
    return t.center +
           from_axis(t.axis, t.minor * std::sin(theta), ring * std::cos(phi), ring * std::sin(phi));
  }

  Vec3 operator()(const Sphere& s) const {
    double x, y, z, n;
    do {
      x = rng.normal();
      y = rng.normal();
      z = rng.normal();
      n = std::sqrt(x * x + y * y + z * z);
    } while (n < 1e-12);
    return s.center + (s.radius / n) * Vec3{x, y, z};
  }
};

const std::array<ParamRange, 6> kTableRanges{{{"top_height", 0.30, 0.48},
                                              {"top_thickness", 0.08, 0.14},
                                              {"top_half_x", 0.30, 0.45},
                                              {"top_half_z", 0.25, 0.40},
                                              {"leg_radius", 0.045, 0.07},
                                              {"leg_inset", 0.02, 0.08}}};
const std::array<ParamRange, 6> kChairRanges{{{"seat_height", -0.05, 0.08},
                                              {"seat_thickness", 0.08, 0.12},
                                              {"seat_half", 0.25, 0.35},
                                              {"back_height", 0.22, 0.32},
                                              {"back_thickness", 0.08, 0.12},
                                              {"leg_radius", 0.045, 0.06}}};
const std::array<ParamRange, 4> kMugRanges{{{"body_radius", 0.22, 0.30},
                                            {"body_half_height", 0.25, 0.35},
                                            {"handle_major", 0.12, 0.16},
                                            {"handle_minor", 0.045, 0.065}}};
const std::array<ParamRange, 7> kAirplaneRanges{{{"fuselage_radius", 0.07, 0.10},
                                                 {"fuselage_half_length", 0.38, 0.45},
                                                 {"wing_half_span", 0.35, 0.45},
                                                 {"wing_half_chord", 0.08, 0.12},
                                                 {"wing_half_thickness", 0.03, 0.045},
                                                 {"tail_height", 0.12, 0.20},
                                                 {"tail_half_chord", 0.06, 0.08}}};

constexpr double kFloor = -0.45;

std::vector<Part> build_table(const ShapeParams& p) {
  const double top = p.at("top_height"), t = p.at("top_thickness");
  const double hx = p.at("top_half_x"), hz = p.at("top_half_z");
  const double r = p.at("leg_radius"), inset = p.at("leg_inset");
  Part slab{"top", {Box{{0.0, top - t / 2, 0.0}, {hx, t / 2, hz}}}};
  // Legs reach into the middle of the slab so their caps are interior.
  const double leg_top = top - t / 2;
  Part legs{"legs", {}};
  for (double sx : {-1.0, 1.0})
    for (double sz : {-1.0, 1.0})
      legs.solids.push_back(Cylinder{{sx * (hx - inset - r), (leg_top + kFloor) / 2, sz * (hz - inset - r)},
                                     1, r, (leg_top - kFloor) / 2});
  return {slab, legs};
}

std::vector<Part> build_chair(const ShapeParams& p) {
  const double sy = p.at("seat_height"), st = p.at("seat_thickness"), h = p.at("seat_half");
  const double bh = p.at("back_height"), bt = p.at("back_thickness"), r = p.at("leg_radius");
  Part seat{"seat", {Box{{0.0, sy, 0.0}, {h, st / 2, h}}}};
  const double back_top = sy + st / 2 + bh;
  Part back{"back", {Box{{0.0, (sy + back_top) / 2, -h + bt / 2}, {h, (back_top - sy) / 2, bt / 2}}}};
  Part legs{"legs", {}};
  const double off = h - r - 0.02;
  for (double sx : {-1.0, 1.0})
    for (double sz : {-1.0, 1.0})
      legs.solids.push_back(Cylinder{{sx * off, (sy + kFloor) / 2, sz * off}, 1, r, (sy - kFloor) / 2});
  return {seat, back, legs};
}

std::vector<Part> build_mug(const ShapeParams& p) {
  const double br = p.at("body_radius"), bh = p.at("body_half_height");
  const double cx = -0.08;
  Part body{"body", {Cylinder{{cx, 0.0, 0.0}, 1, br, bh}}};
  Part handle{"handle", {Torus{{cx + br, 0.0, 0.0}, 2, p.at("handle_major"), p.at("handle_minor")}}};
  return {body, handle};
}

std::vector<Part> build_airplane(const ShapeParams& p) {
  const double fr = p.at("fuselage_radius"), fl = p.at("fuselage_half_length");
  Part fuselage{"fuselage", {Cylinder{{0.0, 0.0, 0.0}, 2, fr, fl}}};
  Part wings{"wings", {Box{{0.0, 0.0, 0.05},
                           {p.at("wing_half_span"), p.at("wing_half_thickness"), p.at("wing_half_chord")}}}};
  const double fin_top = fr + p.at("tail_height");
  const double tc = p.at("tail_half_chord");
  Part tail{"tail", {Box{{0.0, fin_top / 2, -fl + tc}, {0.04, fin_top / 2, tc}}}};
  return {fuselage, wings, tail};
}

}  // namespace

double implicit(const Solid& s, Vec3 p) { return std::visit(ImplicitVisitor{p}, s); }
double surface_area(const Solid& s) { return std::visit(AreaVisitor{}, s); }
Vec3 sample_boundary(const Solid& s, numerics::RandomStream& rng) {
  return std::visit(SampleVisitor{rng}, s);
}

bool Part::contains(Vec3 p, double tolerance) const {
  for (const Solid& s : solids)
    if (implicit(s, p) <= tolerance) return true;
  return false;
}

std::string_view category_name(Category c) {
  switch (c) {
    case Category::table: return "table";
    case Category::chair: return "chair";
    case Category::mug: return "mug";
    case Category::airplane_toy: return "airplane_toy";
  }
  return "unknown";
}

Category parse_category(std::string_view name) {
  for (Category c : all_categories())
    if (category_name(c) == name) return c;
  throw GeometryError("unknown category '" + std::string(name) + "'");
}

std::span<const Category> all_categories() {
  static constexpr std::array<Category, 4> kAll{Category::table, Category::chair, Category::mug,
                                                Category::airplane_toy};
  return kAll;
}

std::vector<std::string> category_part_names(Category c) {
  switch (c) {
    case Category::table: return {"top", "legs"};
    case Category::chair: return {"seat", "back", "legs"};
    case Category::mug: return {"body", "handle"};
    case Category::airplane_toy: return {"fuselage", "wings", "tail"};
  }
  return {};
}

std::span<const ParamRange> param_ranges(Category c) {
  switch (c) {
    case Category::table: return kTableRanges;
    case Category::chair: return kChairRanges;
    case Category::mug: return kMugRanges;
    case Category::airplane_toy: return kAirplaneRanges;
  }
  return {};
}

ShapeParams sample_params(Category c, std::uint64_t seed) {
  numerics::RandomStream rng(seed, std::string("shape/") + std::string(category_name(c)));
  ShapeParams params;
  for (const ParamRange& r : param_ranges(c)) params[std::string(r.name)] = rng.uniform(r.lo, r.hi);
  return params;
}

void validate_params(Category c, const ShapeParams& params) {
  const auto ranges = param_ranges(c);
  for (const ParamRange& r : ranges) {
    const auto it = params.find(std::string(r.name));
    if (it == params.end())
      throw GeometryError(std::string(category_name(c)) + ": missing parameter '" +
                          std::string(r.name) + "'");
    if (!(it->second >= r.lo && it->second <= r.hi))
      throw GeometryError(std::string(category_name(c)) + ": parameter '" + std::string(r.name) +
                          "' = " + std::to_string(it->second) + " outside [" +
                          std::to_string(r.lo) + ", " + std::to_string(r.hi) + "]");
  }
  for (const auto& [name, value] : params) {
    const bool known = std::any_of(ranges.begin(), ranges.end(),
                                   [&](const ParamRange& r) { return r.name == name; });
    if (!known)
      throw GeometryError(std::string(category_name(c)) + ": unknown parameter '" + name + "'");
  }
}

LabeledShape::LabeledShape(Category category, std::vector<Part> parts, std::uint64_t seed,
                           ShapeParams params)
    : category_(category), parts_(std::move(parts)), seed_(seed), params_(std::move(params)) {}

std::vector<std::string> LabeledShape::part_names() const {
  std::vector<std::string> names;
  for (const Part& p : parts_) names.push_back(p.name);
  return names;
}

bool LabeledShape::inside(Vec3 p) const { return part_at(p).has_value(); }

std::optional<std::size_t> LabeledShape::part_at(Vec3 p, double tolerance) const {
  for (std::size_t i = 0; i < parts_.size(); ++i)
    if (parts_[i].contains(p, tolerance)) return i;
  return std::nullopt;
}

bool operator==(const LabeledShape& a, const LabeledShape& b) {
  return a.category_ == b.category_ && a.parts_ == b.parts_ && a.seed_ == b.seed_ &&
         a.params_ == b.params_;
}

LabeledShape generate_shape(Category c, std::uint64_t seed, const ShapeParams& params) {
  validate_params(c, params);
  std::vector<Part> parts;
  switch (c) {
    case Category::table: parts = build_table(params); break;
    case Category::chair: parts = build_chair(params); break;
    case Category::mug: parts = build_mug(params); break;
    case Category::airplane_toy: parts = build_airplane(params); break;
  }
  return LabeledShape(c, std::move(parts), seed, params);
}

LabeledShape generate_shape(Category c, std::uint64_t seed) {
  return generate_shape(c, seed, sample_params(c, seed));
}

}  // namespace m3dseg::geometry
