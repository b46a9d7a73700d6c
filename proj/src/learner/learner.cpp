#include "m3dseg/learner/learner.hpp"

#include <cmath>

#include "m3dseg/common/errors.hpp"

namespace m3dseg::learner {

using namespace numerics;

namespace {

std::string conv_name(std::size_t i, const char* what) { return "encoder.conv" + std::to_string(i) + "." + what; }

void check_weights(const LearnerWeights& w, const PredictorLayout& layout) {
  if (w.theta_m.size() != layout.size() || w.theta_l.size() != layout.size())
    throw ValidationError("learner weights have lengths " + std::to_string(w.theta_m.size()) + " and " +
                          std::to_string(w.theta_l.size()) + ", predictor needs " + std::to_string(layout.size()));
}

}  // namespace

ParameterSet init_encoder(const ArchitectureConfig& config, RandomStream& rng) {
  ParameterSet set;
  std::size_t in = 1;
  const std::size_t k = config.conv_kernel;
  for (std::size_t i = 0; i < config.conv_channels.size(); ++i) {
    const std::size_t out = config.conv_channels[i];
    Tensor w({out, in, k, k, k});
    const double std_dev = std::sqrt(2.0 / static_cast<double>(in * k * k * k));
    for (std::size_t e = 0; e < w.size(); ++e) w.set(e, std_dev * rng.normal());
    set.add(conv_name(i, "weight"), std::move(w));
    set.add(conv_name(i, "bias"), Tensor({out}));
    in = out;
  }
  return set;
}

Tensor grid_tensor(const geometry::OccupancyGrid& grid) {
  const std::size_t r = grid.resolution();
  Tensor t({1, r, r, r});
  for (std::size_t c = 0; c < grid.cell_count(); ++c) t.set(c, grid.values()[c]);
  return t;
}

Tensor points_tensor(std::span<const geometry::Point3f> points) {
  if (points.empty()) throw ValidationError("empty point set");
  Tensor t({points.size(), 3});
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t a = 0; a < 3; ++a) t.set(3 * i + a, points[i][a]);
  return t;
}

Tensor points_tensor(std::span<const geometry::OccupancySample> samples) {
  if (samples.empty()) throw ValidationError("empty sample set");
  Tensor t({samples.size(), 3});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    t.set(3 * i, samples[i].point.x);
    t.set(3 * i + 1, samples[i].point.y);
    t.set(3 * i + 2, samples[i].point.z);
  }
  return t;
}

Var embed_shape(const BoundParameters& encoder, const ArchitectureConfig& config, Var grid) {
  Var x = grid;
  const std::size_t layers = config.conv_channels.size();
  for (std::size_t i = 0; i < layers; ++i) {
    x = conv3d(x, encoder[conv_name(i, "weight")], encoder[conv_name(i, "bias")], config.conv_stride,
               config.conv_padding);
    if (i + 1 < layers) x = relu(x);
  }
  if (x.size() != config.embedding_dim())
    throw ValidationError("encoder output " + shape_string(x.shape()) + " does not collapse to 1^3");
  return reshape(x, {config.embedding_dim()});
}

Tensor embed_shape(const geometry::OccupancyGrid& grid, const ParameterSet& encoder,
                   const ArchitectureConfig& config) {
  if (grid.resolution() != config.resolution)
    throw ValidationError("grid resolution " + std::to_string(grid.resolution()) + " does not match the " +
                          config.preset + " architecture resolution " + std::to_string(config.resolution));
  Graph g;
  BoundParameters bound(encoder, g, false);
  return embed_shape(bound, config, g.constant(grid_tensor(grid))).value();
}

Tensor point_feature(const Tensor& embedding, geometry::Vec3 x) {
  if (checked_mode())
    for (int a = 0; a < 3; ++a)
      if (!(std::abs(x[a]) <= 0.5)) throw ValidationError("point coordinate outside [-0.5, 0.5]");
  const std::size_t m = embedding.size();
  Tensor out({m + 3}, embedding.precision());
  for (std::size_t i = 0; i < m; ++i) out.set(i, embedding.at(i));
  for (int a = 0; a < 3; ++a) out.set(m + static_cast<std::size_t>(a), x[a]);
  return out;
}

LearnerWeights LearnerWeights::zeros(const PredictorLayout& layout) {
  return {Tensor({layout.size()}), Tensor({layout.size()})};
}

Tensor LearnerWeights::effective() const {
  Graph g;
  return add(g.constant(theta_m), g.constant(theta_l)).value();
}

Tensor init_predictor_weights(const PredictorLayout& layout, RandomStream& rng) {
  // Unit-cube coordinates have std 1/sqrt(12) per axis.
  constexpr double kCoordinateStd = 0.28867513459481287;
  // Most of the cube is empty, so branches start mostly off.
  constexpr double kOutputBias = -3.0;
  constexpr double kOutputWeightScale = 0.5;
  Tensor theta({layout.size()});
  for (std::size_t l = 0; l < layout.layers().size(); ++l) {
    const LayerSlot& s = layout.layers()[l];
    const std::size_t m = s.in - 3;
    for (std::size_t o = 0; o < s.out; ++o)
      for (std::size_t i = 0; i < s.in; ++i) {
        double std_dev = std::sqrt(2.0 / static_cast<double>(s.in));
        if (l == 0) std_dev = i < m ? std::sqrt(1.0 / static_cast<double>(m)) : std::sqrt(2.0 / 3.0) / kCoordinateStd;
        if (l + 1 == layout.layers().size()) std_dev *= kOutputWeightScale;
        theta.set(s.weight_offset + o * s.in + i, std_dev * rng.normal());
      }
  }
  const LayerSlot& last = layout.layers().back();
  for (std::size_t o = 0; o < last.out; ++o) theta.set(last.bias_offset + o, kOutputBias);
  return theta;
}

PredictorOutput run_predictor(const PredictorLayout& layout, Var theta, Var embedding, Var points) {
  if (theta.size() != layout.size())
    throw ValidationError("predictor weight vector has length " + std::to_string(theta.size()) + ", expected " +
                          std::to_string(layout.size()));
  const auto& layers = layout.layers();
  Var x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSlot& s = layers[i];
    Var w = slice(theta, s.weight_offset, {s.out, s.in});
    Var b = slice(theta, s.bias_offset, {s.out});
    if (i == 0) {
      x = conditioned_linear(embedding, points, w, b);
    } else {
      x = linear(relu(x), w, b);
    }
  }
  Var activations = sigmoid(x);
  return {activations, channel_max(activations)};
}

PointPrediction predict_point(const Tensor& embedding, geometry::Vec3 x, const LearnerWeights& weights,
                              const PredictorLayout& layout) {
  check_weights(weights, layout);
  const Tensor feature = point_feature(embedding, x);
  const std::size_t m = embedding.size();
  Tensor point({1, 3}, embedding.precision());
  for (std::size_t a = 0; a < 3; ++a) point.set(a, feature.at(m + a));
  Graph g;
  Var theta = add(g.constant(weights.theta_m), g.constant(weights.theta_l));
  const PredictorOutput out = run_predictor(layout, theta, g.constant(embedding), g.constant(point));
  PointPrediction p;
  p.branch_activations = out.activations.value().to_vector();
  p.occupancy = out.occupancy.value.value().item();
  p.part_label = out.occupancy.argmax[0];
  return p;
}

Segmentation segment_points(const Tensor& embedding, std::span<const geometry::Point3f> points,
                            const LearnerWeights& weights, const PredictorLayout& layout) {
  check_weights(weights, layout);
  Graph g;
  Var theta = add(g.constant(weights.theta_m), g.constant(weights.theta_l));
  const PredictorOutput out = run_predictor(layout, theta, g.constant(embedding), g.constant(points_tensor(points)));
  return {out.occupancy.argmax, out.occupancy.value.value().to_vector()};
}

Segmentation segment_shape(const geometry::OccupancyGrid& grid, std::span<const geometry::Point3f> points,
                           const ParameterSet& encoder, const LearnerWeights& weights,
                           const ArchitectureConfig& config) {
  return segment_points(embed_shape(grid, encoder, config), points, weights, PredictorLayout(config));
}

}  // namespace m3dseg::learner
