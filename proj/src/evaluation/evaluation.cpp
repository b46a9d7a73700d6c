#include "m3dseg/evaluation/evaluation.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

#include "m3dseg/common/errors.hpp"

namespace m3dseg::evaluation {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::vector<std::size_t> BranchAssignment::apply(std::span<const std::size_t> branches) const {
  std::vector<std::size_t> out(branches.size());
  for (std::size_t i = 0; i < branches.size(); ++i) out[i] = mapping.at(branches[i]);
  return out;
}

BranchAssignment fit_branch_assignment(std::span<const std::size_t> branches, std::span<const std::size_t> labels,
                                       std::size_t branch_count, std::size_t part_count) {
  if (branches.size() != labels.size())
    throw ValidationError("assignment: " + std::to_string(branches.size()) + " predictions for " +
                          std::to_string(labels.size()) + " labels");
  if (part_count == 0) throw ValidationError("assignment: part count must be positive");
  std::vector<std::size_t> counts(branch_count * part_count, 0);
  for (std::size_t i = 0; i < branches.size(); ++i) {
    if (branches[i] >= branch_count) throw ValidationError("assignment: branch index out of range");
    if (labels[i] >= part_count) throw ValidationError("assignment: label out of range");
    ++counts[branches[i] * part_count + labels[i]];
  }
  BranchAssignment a;
  a.mapping.resize(branch_count, 0);
  for (std::size_t b = 0; b < branch_count; ++b) {
    const auto row = counts.begin() + static_cast<std::ptrdiff_t>(b * part_count);
    a.mapping[b] = static_cast<std::size_t>(std::max_element(row, row + static_cast<std::ptrdiff_t>(part_count)) - row);
  }
  return a;
}

SegmentationScore compute_iou(std::span<const std::size_t> predicted, std::span<const std::size_t> labels,
                              std::size_t part_count) {
  if (predicted.empty()) throw ValidationError("compute_iou: empty point set");
  if (predicted.size() != labels.size()) throw ValidationError("compute_iou: misaligned streams");
  std::vector<std::size_t> inter(part_count, 0), pred(part_count, 0), gt(part_count, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] >= part_count || labels[i] >= part_count)
      throw ValidationError("compute_iou: label out of range");
    ++pred[predicted[i]];
    ++gt[labels[i]];
    if (predicted[i] == labels[i]) {
      ++inter[labels[i]];
      ++correct;
    }
  }
  SegmentationScore s;
  s.n_points = predicted.size();
  double total = 0.0;
  for (std::size_t p = 0; p < part_count; ++p) {
    const std::size_t uni = pred[p] + gt[p] - inter[p];
    const double iou = uni == 0 ? 1.0 : static_cast<double>(inter[p]) / static_cast<double>(uni);
    s.per_part_iou.push_back(iou);
    total += iou;
  }
  s.mean_iou = total / static_cast<double>(part_count);
  s.accuracy = static_cast<double>(correct) / static_cast<double>(predicted.size());
  return s;
}

double category_miou(std::span<const SegmentationScore> scores) {
  if (scores.empty()) throw ValidationError("category_miou: no shapes");
  double total = 0.0;
  for (const auto& s : scores) total += s.mean_iou;
  return total / static_cast<double>(scores.size());
}

CategoryScore evaluate_category(const training::LearnerModel& model, std::span<const EvalShape> shapes) {
  if (shapes.empty()) throw ValidationError("evaluation: no shapes");
  const learner::PredictorLayout layout(model.config);
  const std::size_t parts = shapes.front().record->part_count();
  CategoryScore score;
  score.category = shapes.front().record->category;
  score.n_shapes = shapes.size();
  std::vector<std::vector<std::size_t>> branches;
  std::vector<std::size_t> all_branches, all_labels;
  for (const EvalShape& s : shapes) {
    if (s.record->category != score.category || s.record->part_count() != parts)
      throw ValidationError("evaluation: shapes must share one category");
    const std::size_t idx = model.index_of(s.record->id);
    const learner::Segmentation seg =
        learner::segment_points(model.embeddings[idx], s.points.points, model.weights(idx), layout);
    all_branches.insert(all_branches.end(), seg.labels.begin(), seg.labels.end());
    all_labels.insert(all_labels.end(), s.points.labels.begin(), s.points.labels.end());
    branches.push_back(seg.labels);
  }
  score.assignment = fit_branch_assignment(all_branches, all_labels, layout.branch_count(), parts);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const std::vector<std::size_t> gt(shapes[i].points.labels.begin(), shapes[i].points.labels.end());
    SegmentationScore s = compute_iou(score.assignment.apply(branches[i]), gt, parts);
    s.category = score.category;
    score.shapes.push_back(std::move(s));
  }
  score.mean_iou = category_miou(score.shapes);
  score.accuracy = compute_iou(score.assignment.apply(all_branches), all_labels, parts).accuracy;
  score.n_points = all_labels.size();
  return score;
}

CategoryScore evaluate_records(const training::LearnerModel& model,
                               std::span<const geometry::ShapeRecord* const> records, std::size_t n_points) {
  std::vector<EvalShape> shapes;
  for (const auto* r : records) shapes.push_back({r, r->cloud.prefix(std::min(n_points, r->cloud.size()))});
  return evaluate_category(model, shapes);
}

double SweepResult::spread() const {
  if (rows.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(rows.begin(), rows.end(),
                                            [](const SweepRow& a, const SweepRow& b) { return a.mean_iou < b.mean_iou; });
  return hi->mean_iou - lo->mean_iou;
}

SweepResult point_count_sweep(const training::LearnerModel& model,
                              std::span<const geometry::ShapeRecord* const> records,
                              std::span<const std::size_t> counts, std::uint64_t seed) {
  SweepResult result;
  for (std::size_t count : counts) {
    std::vector<EvalShape> shapes;
    for (const auto* r : records) {
      if (r->params) {
        const std::uint64_t s = numerics::fnv1a64(r->id, seed ^ (0x9e3779b97f4a7c15ULL * count));
        shapes.push_back({r, geometry::sample_surface_points(r->shape(), count, s)});
      } else {
        shapes.push_back({r, r->cloud.prefix(std::min(count, r->cloud.size()))});
      }
    }
    const CategoryScore score = evaluate_category(model, shapes);
    result.category = score.category;
    result.rows.push_back({count, score.mean_iou, score.accuracy});
  }
  return result;
}

std::string scores_csv(std::span<const CategoryScore> scores) {
  std::string out = "category,n_shapes,mean_iou,accuracy\n";
  for (const auto& s : scores)
    out += s.category + "," + std::to_string(s.n_shapes) + "," + fixed(s.mean_iou, 6) + "," + fixed(s.accuracy, 6) + "\n";
  return out;
}

std::string scores_json(std::span<const CategoryScore> scores) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& s : scores) {
    nlohmann::ordered_json shapes = nlohmann::ordered_json::array();
    for (const auto& sh : s.shapes)
      shapes.push_back({{"mean_iou", sh.mean_iou}, {"accuracy", sh.accuracy}, {"per_part_iou", sh.per_part_iou}});
    out.push_back({{"category", s.category},
                   {"n_shapes", s.n_shapes},
                   {"n_points", s.n_points},
                   {"mean_iou", s.mean_iou},
                   {"accuracy", s.accuracy},
                   {"assignment_fit_on", "evaluation split"},
                   {"branch_to_part", s.assignment.mapping},
                   {"shapes", shapes}});
  }
  return out.dump(2) + "\n";
}

std::string sweep_csv(std::span<const SweepResult> sweeps) {
  std::string out = "category,points,mean_iou,accuracy\n";
  for (const auto& s : sweeps)
    for (const auto& r : s.rows)
      out += s.category + "," + std::to_string(r.count) + "," + fixed(r.mean_iou, 6) + "," + fixed(r.accuracy, 6) + "\n";
  return out;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
  std::string out = "setting,iou,acc\n";
  for (const auto& r : rows) out += r.setting + "," + fixed(100.0 * r.iou, 2) + "," + fixed(100.0 * r.acc, 2) + "\n";
  return out;
}

}  // namespace m3dseg::evaluation
