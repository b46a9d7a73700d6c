#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "m3dseg/common/binary_io.hpp"
#include "m3dseg/geometry/sampling.hpp"
#include "m3dseg/geometry/shape.hpp"

namespace m3dseg::geometry {

inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::uint32_t kDefaultPointCount = 2048;

/// One stored shape. Synthetic records carry the generator parameters, so the
/// analytic shape can be rebuilt; imported records do not.
struct ShapeRecord {
  std::string id;
  std::string category;
  std::uint64_t seed = 0;
  std::string split = "train";
  std::vector<std::string> part_names;
  std::optional<ShapeParams> params;
  OccupancyGrid grid;
  PointCloud cloud;

  std::size_t part_count() const { return part_names.size(); }
  /// Regenerates the analytic shape; throws ValidationError for imported records.
  LabeledShape shape() const;

  friend bool operator==(const ShapeRecord&, const ShapeRecord&) = default;
};

struct Dataset {
  std::uint32_t version = kDatasetVersion;
  std::vector<ShapeRecord> records;

  std::vector<const ShapeRecord*> select(std::string_view category = {}, std::string_view split = {}) const;
  /// Throws ValidationError on duplicate ids, label/part mismatches or
  /// inconsistent resolutions.
  void validate() const;
  /// FNV digest over the manifest and every blob, in record order.
  std::uint64_t digest() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Voxelizes and samples a generated shape into a record.
ShapeRecord make_record(const LabeledShape& shape, std::string id, std::string split,
                        std::uint32_t resolution, std::uint32_t points = kDefaultPointCount);

/// `count` shapes of one category with seeds derived from `master_seed`.
std::vector<ShapeRecord> generate_records(Category category, std::size_t count, std::uint64_t master_seed,
                                          std::string split, std::uint32_t resolution,
                                          std::uint32_t points = kDefaultPointCount);

io::Bytes encode_grid(const OccupancyGrid& grid);
OccupancyGrid decode_grid(std::span<const std::uint8_t> bytes, const std::string& what = "grid");
io::Bytes encode_cloud(const PointCloud& cloud);
PointCloud decode_cloud(std::span<const std::uint8_t> bytes, const std::string& what = "points");

/// Writes manifest.json, <id>.grid and <id>.pts into `dir` (created if absent).
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
/// Reads and verifies a dataset directory. Throws FormatError on bad magic,
/// version or checksum, ValidationError on manifest problems, IoError on
/// filesystem failures.
Dataset load_dataset(const std::filesystem::path& dir);

/// Parses `x y z label` lines into a labeled cloud.
PointCloud import_text_points(const std::filesystem::path& path);
/// Builds a record from an external cloud; the grid marks cells that contain
/// at least one point.
ShapeRecord import_record(PointCloud cloud, std::string id, std::string category,
                          std::vector<std::string> part_names, std::string split, std::uint32_t resolution);

}  // namespace m3dseg::geometry
