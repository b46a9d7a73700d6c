#pragma once

#include <cstdint>
#include <string>

#include "m3dseg/geometry/dataset.hpp"
#include "m3dseg/learner/architecture.hpp"
#include "m3dseg/learner/learner.hpp"
#include "m3dseg/numerics/parameters.hpp"
#include "m3dseg/numerics/random.hpp"

namespace m3dseg::metalearner {

/// vae: f1 has a mean head and a log-variance head and the latent is sampled.
/// deterministic: f1 is a single feature-to-latent stack.
enum class Variant { vae, deterministic };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

/// Encoder, f1 heads and f2 (the hypernetwork) in one named parameter set:
/// `encoder.*`, `f1_mean.*`, `f1_logvar.*` (vae only), `f2.*`.
struct MetaParams {
  Variant variant = Variant::vae;
  learner::ArchitectureConfig config;
  numerics::ParameterSet params;

  friend bool operator==(const MetaParams&, const MetaParams&) = default;
};

MetaParams init_meta_params(const learner::ArchitectureConfig& config, Variant variant, std::uint64_t seed);

struct TaskDistribution {
  numerics::Var mu;
  /// Invalid for the deterministic variant.
  numerics::Var log_variance;
};

/// f1 on every row [f_v, x_i] for the points [n, 3], mean-pooled over rows.
TaskDistribution estimate_task_distribution(const numerics::BoundParameters& params, const MetaParams& meta,
                                            numerics::Var embedding, numerics::Var points);
/// The same on an explicit feature matrix [n, m + 3]; returns (mu, log_variance).
std::pair<numerics::Tensor, numerics::Tensor> estimate_task_distribution(const numerics::Tensor& features,
                                                                         const MetaParams& meta);

enum class SamplingMode { stochastic, deterministic };

/// mu + exp(log_variance / 2) * eps with eps from `rng` in stochastic mode,
/// mu itself in deterministic mode or when log_variance is invalid.
numerics::Var sample_latent(numerics::Var mu, numerics::Var log_variance, SamplingMode mode,
                            numerics::RandomStream& rng);

/// f2 (ReLU hidden, linear output) scaled by the configured gain: [w].
numerics::Var predict_learner_weights(const numerics::BoundParameters& params, const MetaParams& meta,
                                      numerics::Var latent);

/// Every intermediate of the grid-to-weights path for one shape.
struct MetaForward {
  numerics::Var embedding;
  TaskDistribution distribution;
  numerics::Var latent;
  numerics::Var theta_m;
};

MetaForward meta_forward(const numerics::BoundParameters& params, const MetaParams& meta, numerics::Var grid,
                         numerics::Var task_points, SamplingMode mode, numerics::RandomStream& rng);

/// The first `task_points` cloud points of a record.
numerics::Tensor task_points(const geometry::ShapeRecord& record, const learner::ArchitectureConfig& config);

/// Deterministic theta_m and embedding of one shape.
struct ShapeWeights {
  numerics::Tensor embedding;
  numerics::Tensor theta_m;
};
ShapeWeights predict_shape_weights(const MetaParams& meta, const geometry::ShapeRecord& record);

}  // namespace m3dseg::metalearner
