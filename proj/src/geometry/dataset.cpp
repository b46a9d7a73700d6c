#include "m3dseg/geometry/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "m3dseg/numerics/random.hpp"

namespace m3dseg::geometry {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::string_view kGridMagic = "M3DG";
constexpr std::string_view kPointsMagic = "M3DP";

bool safe_id(const std::string& id) {
  if (id.empty() || id.front() == '.') return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '-' || c == '.';
  });
}

std::uint64_t digest_of(std::span<const std::uint8_t> bytes) { return numerics::fnv1a64(bytes.data(), bytes.size()); }

json manifest_json(const Dataset& d) {
  json records = json::array();
  for (const ShapeRecord& r : d.records) {
    const io::Bytes grid = encode_grid(r.grid);
    const io::Bytes pts = encode_cloud(r.cloud);
    json rec = {{"id", r.id},
                {"category", r.category},
                {"seed", r.seed},
                {"split", r.split},
                {"part_names", r.part_names},
                {"grid", {{"file", r.id + ".grid"}, {"resolution", r.grid.resolution()}, {"fnv1a64", io::hex64(digest_of(grid))}}},
                {"points", {{"file", r.id + ".pts"}, {"count", r.cloud.size()}, {"fnv1a64", io::hex64(digest_of(pts))}}}};
    rec["params"] = r.params ? json(*r.params) : json(nullptr);
    records.push_back(std::move(rec));
  }
  return {{"format", "m3dseg-dataset"}, {"version", d.version}, {"records", std::move(records)}};
}

template <class T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ValidationError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + ": field '" + std::string(key) + "' has the wrong type");
  }
}

}  // namespace

LabeledShape ShapeRecord::shape() const {
  if (!params) throw ValidationError("record '" + id + "' has no generator parameters");
  return generate_shape(parse_category(category), seed, *params);
}

std::vector<const ShapeRecord*> Dataset::select(std::string_view category, std::string_view split) const {
  std::vector<const ShapeRecord*> out;
  for (const ShapeRecord& r : records)
    if ((category.empty() || r.category == category) && (split.empty() || r.split == split)) out.push_back(&r);
  return out;
}

void Dataset::validate() const {
  std::set<std::string> ids;
  std::optional<std::uint32_t> resolution;
  for (const ShapeRecord& r : records) {
    if (!safe_id(r.id)) throw ValidationError("invalid shape id '" + r.id + "'");
    if (!ids.insert(r.id).second) throw ValidationError("duplicate shape id '" + r.id + "'");
    if (r.split != "train" && r.split != "test")
      throw ValidationError("record '" + r.id + "': split must be train or test, got '" + r.split + "'");
    if (r.part_names.empty()) throw ValidationError("record '" + r.id + "' has no parts");
    if (resolution && r.grid.resolution() != *resolution)
      throw ValidationError("record '" + r.id + "' has resolution " + std::to_string(r.grid.resolution()) +
                            ", expected " + std::to_string(*resolution));
    resolution = r.grid.resolution();
    try {
      r.cloud.validate();
    } catch (const GeometryError& e) {
      throw ValidationError("record '" + r.id + "': " + e.what());
    }
    if (!r.cloud.has_labels()) throw ValidationError("record '" + r.id + "' has an unlabeled cloud");
    for (auto l : r.cloud.labels)
      if (l >= r.part_count())
        throw ValidationError("record '" + r.id + "': label " + std::to_string(l) + " >= part count " +
                              std::to_string(r.part_count()));
  }
}

std::uint64_t Dataset::digest() const { return numerics::fnv1a64(manifest_json(*this).dump()); }

ShapeRecord make_record(const LabeledShape& shape, std::string id, std::string split, std::uint32_t resolution,
                        std::uint32_t points) {
  ShapeRecord r;
  r.id = std::move(id);
  r.category = std::string(category_name(shape.category()));
  r.seed = shape.seed();
  r.split = std::move(split);
  r.part_names = shape.part_names();
  r.params = shape.params();
  r.grid = voxelize(shape, resolution);
  r.cloud = sample_surface_points(shape, points, shape.seed());
  return r;
}

std::vector<ShapeRecord> generate_records(Category category, std::size_t count, std::uint64_t master_seed,
                                          std::string split, std::uint32_t resolution, std::uint32_t points) {
  numerics::RandomStream seeds(master_seed, "dataset/" + std::string(category_name(category)));
  std::vector<ShapeRecord> out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t seed = seeds.next_u64();
    char id[64];
    std::snprintf(id, sizeof id, "%s_%03zu", std::string(category_name(category)).c_str(), i);
    out.push_back(make_record(generate_shape(category, seed), id, split, resolution, points));
  }
  return out;
}

io::Bytes encode_grid(const OccupancyGrid& grid) {
  io::Writer w;
  w.text(kGridMagic);
  w.u32(kDatasetVersion);
  w.u32(grid.resolution());
  w.bytes(grid.values());
  return w.take();
}

OccupancyGrid decode_grid(std::span<const std::uint8_t> bytes, const std::string& what) {
  io::Reader r(bytes, what);
  r.expect_magic(kGridMagic);
  const auto version = r.u32();
  if (version != kDatasetVersion)
    throw FormatError(what + ": unsupported version " + std::to_string(version));
  const auto res = r.u32();
  const std::size_t cells = static_cast<std::size_t>(res) * res * res;
  if (r.remaining() != cells)
    throw FormatError(what + ": expected " + std::to_string(cells) + " cells, found " + std::to_string(r.remaining()));
  auto data = r.bytes(cells);
  try {
    return OccupancyGrid(res, std::vector<std::uint8_t>(data.begin(), data.end()));
  } catch (const GeometryError& e) {
    throw FormatError(what + ": " + e.what());
  }
}

io::Bytes encode_cloud(const PointCloud& cloud) {
  if (!cloud.has_labels()) throw ValidationError("cannot encode an unlabeled cloud");
  io::Writer w;
  w.text(kPointsMagic);
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(cloud.size()));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (float c : cloud.points[i]) w.f32(c);
    w.u16(cloud.labels[i]);
  }
  return w.take();
}

PointCloud decode_cloud(std::span<const std::uint8_t> bytes, const std::string& what) {
  io::Reader r(bytes, what);
  r.expect_magic(kPointsMagic);
  const auto version = r.u32();
  if (version != kDatasetVersion)
    throw FormatError(what + ": unsupported version " + std::to_string(version));
  const auto n = r.u32();
  if (r.remaining() != static_cast<std::size_t>(n) * 14)
    throw FormatError(what + ": payload size does not match " + std::to_string(n) + " points");
  PointCloud cloud;
  cloud.points.resize(n);
  cloud.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (float& c : cloud.points[i]) c = r.f32();
    cloud.labels[i] = r.u16();
  }
  return cloud;
}

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  dataset.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  for (const ShapeRecord& r : dataset.records) {
    io::write_file(dir / (r.id + ".grid"), encode_grid(r.grid));
    io::write_file(dir / (r.id + ".pts"), encode_cloud(r.cloud));
  }
  io::write_text(dir / "manifest.json", manifest_json(dataset).dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  json m;
  try {
    m = json::parse(io::read_text(manifest_path));
  } catch (const json::parse_error& e) {
    throw FormatError(manifest_path.string() + ": invalid JSON: " + e.what());
  }
  const std::string where = manifest_path.string();
  if (!m.is_object() || field<std::string>(m, "format", where) != "m3dseg-dataset")
    throw FormatError(where + ": not a dataset manifest");
  Dataset d;
  d.version = field<std::uint32_t>(m, "version", where);
  if (d.version != kDatasetVersion) throw FormatError(where + ": unsupported version " + std::to_string(d.version));
  const json records = field<json>(m, "records", where);
  if (!records.is_array()) throw ValidationError(where + ": records must be an array");
  std::set<std::string> ids;
  for (const json& rec : records) {
    ShapeRecord r;
    r.id = field<std::string>(rec, "id", where);
    if (!safe_id(r.id)) throw ValidationError(where + ": invalid shape id '" + r.id + "'");
    if (!ids.insert(r.id).second) throw ValidationError(where + ": duplicate shape id '" + r.id + "'");
    const std::string rw = where + " record '" + r.id + "'";
    r.category = field<std::string>(rec, "category", rw);
    r.seed = field<std::uint64_t>(rec, "seed", rw);
    r.split = field<std::string>(rec, "split", rw);
    r.part_names = field<std::vector<std::string>>(rec, "part_names", rw);
    const json params = field<json>(rec, "params", rw);
    if (!params.is_null()) r.params = field<ShapeParams>(rec, "params", rw);

    const json g = field<json>(rec, "grid", rw);
    const json p = field<json>(rec, "points", rw);
    const fs::path grid_path = dir / field<std::string>(g, "file", rw);
    const fs::path pts_path = dir / field<std::string>(p, "file", rw);
    const io::Bytes grid_bytes = io::read_file(grid_path);
    const io::Bytes pts_bytes = io::read_file(pts_path);
    if (io::hex64(digest_of(grid_bytes)) != field<std::string>(g, "fnv1a64", rw))
      throw FormatError(grid_path.string() + ": checksum mismatch");
    if (io::hex64(digest_of(pts_bytes)) != field<std::string>(p, "fnv1a64", rw))
      throw FormatError(pts_path.string() + ": checksum mismatch");
    r.grid = decode_grid(grid_bytes, grid_path.string());
    r.cloud = decode_cloud(pts_bytes, pts_path.string());
    if (r.grid.resolution() != field<std::uint32_t>(g, "resolution", rw))
      throw ValidationError(rw + ": grid resolution disagrees with manifest");
    if (r.cloud.size() != field<std::size_t>(p, "count", rw))
      throw ValidationError(rw + ": point count disagrees with manifest");
    d.records.push_back(std::move(r));
  }
  d.validate();
  return d;
}

PointCloud import_text_points(const fs::path& path) {
  std::istringstream in(io::read_text(path));
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double x, y, z;
    long label;
    std::string extra;
    if (!(ls >> x >> y >> z >> label) || (ls >> extra) || label < 0 || label > 65535)
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected 'x y z label'");
    cloud.points.push_back({static_cast<float>(x), static_cast<float>(y), static_cast<float>(z)});
    cloud.labels.push_back(static_cast<std::uint16_t>(label));
  }
  if (cloud.points.empty()) throw ValidationError(path.string() + ": no points");
  try {
    cloud.validate();
  } catch (const GeometryError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return cloud;
}

ShapeRecord import_record(PointCloud cloud, std::string id, std::string category,
                          std::vector<std::string> part_names, std::string split, std::uint32_t resolution) {
  if (resolution < 2) throw ValidationError("resolution must be >= 2");
  OccupancyGrid grid(resolution);
  for (const Point3f& p : cloud.points) {
    auto cell = [&](float c) {
      const auto i = static_cast<long>(std::floor((static_cast<double>(c) + 0.5) * resolution));
      return static_cast<std::uint32_t>(std::clamp<long>(i, 0, static_cast<long>(resolution) - 1));
    };
    grid.set(cell(p[0]), cell(p[1]), cell(p[2]), true);
  }
  ShapeRecord r;
  r.id = std::move(id);
  r.category = std::move(category);
  r.split = std::move(split);
  r.part_names = std::move(part_names);
  r.grid = std::move(grid);
  r.cloud = std::move(cloud);
  return r;
}

}  // namespace m3dseg::geometry
