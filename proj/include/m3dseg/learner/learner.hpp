#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "m3dseg/geometry/sampling.hpp"
#include "m3dseg/learner/architecture.hpp"
#include "m3dseg/numerics/ops.hpp"
#include "m3dseg/numerics/parameters.hpp"
#include "m3dseg/numerics/random.hpp"

namespace m3dseg::learner {

/// Conv kernels `encoder.conv<i>.weight` [C_out, C_in, 4, 4, 4] and biases,
/// He-normal initialized.
numerics::ParameterSet init_encoder(const ArchitectureConfig& config, numerics::RandomStream& rng);

/// The occupancy grid as a [1, R, R, R] tensor of 0/1 values.
numerics::Tensor grid_tensor(const geometry::OccupancyGrid& grid);
/// Points as an [n, 3] tensor.
numerics::Tensor points_tensor(std::span<const geometry::Point3f> points);
numerics::Tensor points_tensor(std::span<const geometry::OccupancySample> samples);

/// Conv stack with ReLU after every layer but the last, flattened to [m].
numerics::Var embed_shape(const numerics::BoundParameters& encoder, const ArchitectureConfig& config,
                          numerics::Var grid);
/// Graph-free convenience; throws ValidationError on a resolution mismatch.
numerics::Tensor embed_shape(const geometry::OccupancyGrid& grid, const numerics::ParameterSet& encoder,
                             const ArchitectureConfig& config);

/// [f_v, x] of length m + 3. In checked mode x must lie in the unit cube.
numerics::Tensor point_feature(const numerics::Tensor& embedding, geometry::Vec3 x);

/// Flat predictor weights split into the meta-predicted and fine-tuned parts.
/// The predictor always runs on theta_m + theta_l.
struct LearnerWeights {
  numerics::Tensor theta_m;
  numerics::Tensor theta_l;

  static LearnerWeights zeros(const PredictorLayout& layout);
  numerics::Tensor effective() const;
};

/// Initial predictor weight vector [w]. Hidden layers are He-normal with zero
/// biases. In the first layer the embedding columns use std sqrt(1/m) and the
/// coordinate columns are scaled up so a point spread over the unit cube moves
/// each pre-activation about as much as the embedding does.
numerics::Tensor init_predictor_weights(const PredictorLayout& layout, numerics::RandomStream& rng);

/// Branch activations [n, c] and their channel max for n points.
struct PredictorOutput {
  numerics::Var activations;
  numerics::ChannelMax occupancy;
};

/// Runs g2 and g3 with the flat weight vector `theta` [w] on the points
/// [n, 3] conditioned on the embedding [m].
PredictorOutput run_predictor(const PredictorLayout& layout, numerics::Var theta, numerics::Var embedding,
                              numerics::Var points);

struct PointPrediction {
  std::vector<double> branch_activations;
  double occupancy = 0.0;
  std::size_t part_label = 0;
};

/// Throws ValidationError when the weight lengths do not match the layout.
PointPrediction predict_point(const numerics::Tensor& embedding, geometry::Vec3 x, const LearnerWeights& weights,
                              const PredictorLayout& layout);

struct Segmentation {
  std::vector<std::size_t> labels;
  std::vector<double> occupancies;
};

/// Predictions for every point with the embedding computed once.
Segmentation segment_points(const numerics::Tensor& embedding, std::span<const geometry::Point3f> points,
                            const LearnerWeights& weights, const PredictorLayout& layout);
Segmentation segment_shape(const geometry::OccupancyGrid& grid, std::span<const geometry::Point3f> points,
                           const numerics::ParameterSet& encoder, const LearnerWeights& weights,
                           const ArchitectureConfig& config);

}  // namespace m3dseg::learner
