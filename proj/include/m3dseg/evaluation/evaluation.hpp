#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "m3dseg/geometry/dataset.hpp"
#include "m3dseg/training/training.hpp"

namespace m3dseg::evaluation {

/// Total map from predictor branch to ground-truth part.
struct BranchAssignment {
  std::vector<std::size_t> mapping;

  std::vector<std::size_t> apply(std::span<const std::size_t> branches) const;
};

/// Each branch maps to the part it co-occurs with most (lowest part on ties);
/// branches that never fire map to part 0.
BranchAssignment fit_branch_assignment(std::span<const std::size_t> branches, std::span<const std::size_t> labels,
                                       std::size_t branch_count, std::size_t part_count);

struct SegmentationScore {
  std::vector<double> per_part_iou;
  double mean_iou = 0.0;
  double accuracy = 0.0;
  std::size_t n_points = 0;
  std::string category;
};

/// Per-part IoU (1.0 for parts absent from both streams), their mean, and the
/// fraction of matching points.
SegmentationScore compute_iou(std::span<const std::size_t> predicted, std::span<const std::size_t> labels,
                              std::size_t part_count);

/// Unweighted mean of per-shape mean IoU.
double category_miou(std::span<const SegmentationScore> scores);

struct CategoryScore {
  std::string category;
  std::size_t n_shapes = 0;
  std::size_t n_points = 0;
  double mean_iou = 0.0;
  double accuracy = 0.0;
  BranchAssignment assignment;
  std::vector<SegmentationScore> shapes;
};

/// Evaluation points of one shape: its stored cloud truncated to `n`.
struct EvalShape {
  const geometry::ShapeRecord* record = nullptr;
  geometry::PointCloud points;
};

/// Segments every shape, fits one assignment over the whole category and
/// scores each shape. Accuracy is pooled over all points.
CategoryScore evaluate_category(const training::LearnerModel& model, std::span<const EvalShape> shapes);
/// Convenience over stored clouds, using the first `n_points` of each.
CategoryScore evaluate_records(const training::LearnerModel& model,
                               std::span<const geometry::ShapeRecord* const> records, std::size_t n_points);

struct SweepRow {
  std::size_t count = 0;
  double mean_iou = 0.0;
  double accuracy = 0.0;
};

struct SweepResult {
  std::string category;
  std::vector<SweepRow> rows;
  double spread() const;
};

/// Resamples surface points at every count from the analytic shapes (stored
/// clouds for imported records) and rescoring.
SweepResult point_count_sweep(const training::LearnerModel& model,
                              std::span<const geometry::ShapeRecord* const> records,
                              std::span<const std::size_t> counts, std::uint64_t seed);

/// `category,n_shapes,mean_iou,accuracy` with a header line.
std::string scores_csv(std::span<const CategoryScore> scores);
std::string scores_json(std::span<const CategoryScore> scores);
std::string sweep_csv(std::span<const SweepResult> sweeps);

struct AblationRow {
  std::string setting;
  double iou = 0.0;
  double acc = 0.0;
};
/// `setting,iou,acc` in percent.
std::string ablation_csv(std::span<const AblationRow> rows);

}  // namespace m3dseg::evaluation
