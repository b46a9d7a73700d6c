#include "m3dseg/metalearner/metalearner.hpp"

#include <algorithm>

#include "m3dseg/learner/layers.hpp"
#include "m3dseg/numerics/ops.hpp"

namespace m3dseg::metalearner {

using namespace numerics;
using learner::ArchitectureConfig;

std::string variant_name(Variant v) { return v == Variant::vae ? "vae" : "deterministic"; }

Variant parse_variant(const std::string& name) {
  if (name == "vae") return Variant::vae;
  if (name == "deterministic") return Variant::deterministic;
  throw ValidationError("unknown meta-learner variant '" + name + "'");
}

MetaParams init_meta_params(const ArchitectureConfig& config, Variant variant, std::uint64_t seed) {
  config.validate();
  MetaParams meta{variant, config, {}};
  RandomStream rng(seed, "init/meta");
  RandomStream enc_rng = rng.fork("encoder");
  meta.params = learner::init_encoder(config, enc_rng);
  RandomStream mean_rng = rng.fork("f1_mean");
  learner::add_dense_stack(meta.params, "f1_mean", config.feature_dim(), config.f1_dims, mean_rng);
  if (variant == Variant::vae) {
    RandomStream lv_rng = rng.fork("f1_logvar");
    learner::add_dense_stack(meta.params, "f1_logvar", config.feature_dim(), config.f1_dims, lv_rng);
  }
  std::vector<std::size_t> f2_dims = config.f2_hidden;
  f2_dims.push_back(learner::PredictorLayout(config).size());
  RandomStream f2_rng = rng.fork("f2");
  learner::add_dense_stack(meta.params, "f2", config.latent_dim(), f2_dims, f2_rng);
  // The output bias carries a standard predictor initialization, so the
  // initial theta_m is that network plus a latent-dependent perturbation.
  RandomStream predictor_rng(seed, "init/predictor");
  const Tensor base = learner::init_predictor_weights(learner::PredictorLayout(config), predictor_rng);
  Tensor& bias = meta.params.get(learner::layer_name("f2", config.f2_hidden.size(), "bias"));
  for (std::size_t i = 0; i < base.size(); ++i) bias.set(i, base.at(i) / config.f2_gain);
  return meta;
}

TaskDistribution estimate_task_distribution(const BoundParameters& params, const MetaParams& meta, Var embedding,
                                            Var points) {
  const std::size_t layers = meta.config.f1_dims.size();
  TaskDistribution d;
  d.mu = mean_rows(learner::conditioned_dense_stack(params, "f1_mean", layers, embedding, points));
  if (meta.variant == Variant::vae)
    d.log_variance = mean_rows(learner::conditioned_dense_stack(params, "f1_logvar", layers, embedding, points));
  return d;
}

std::pair<Tensor, Tensor> estimate_task_distribution(const Tensor& features, const MetaParams& meta) {
  if (features.rank() != 2 || features.dim(1) != meta.config.feature_dim())
    throw ValidationError("feature matrix " + shape_string(features.shape()) + " is not [n, " +
                          std::to_string(meta.config.feature_dim()) + "]");
  Graph g;
  BoundParameters params(meta.params, g, false);
  Var x = g.constant(features);
  const std::size_t layers = meta.config.f1_dims.size();
  Tensor mu = mean_rows(learner::dense_stack(params, "f1_mean", layers, x)).value();
  Tensor lv(mu.shape(), mu.precision());
  if (meta.variant == Variant::vae) lv = mean_rows(learner::dense_stack(params, "f1_logvar", layers, x)).value();
  return {std::move(mu), std::move(lv)};
}

Var sample_latent(Var mu, Var log_variance, SamplingMode mode, RandomStream& rng) {
  if (mode == SamplingMode::deterministic || !log_variance.valid()) return mu;
  Tensor eps(mu.shape(), mu.value().precision());
  for (std::size_t i = 0; i < eps.size(); ++i) eps.set(i, rng.normal());
  Var sigma = numerics::exp(scale(log_variance, 0.5));
  return add(mu, mul(sigma, mu.graph()->constant(std::move(eps))));
}

Var predict_learner_weights(const BoundParameters& params, const MetaParams& meta, Var latent) {
  if (latent.size() != meta.config.latent_dim())
    throw ValidationError("latent has length " + std::to_string(latent.size()) + ", expected " +
                          std::to_string(meta.config.latent_dim()));
  Var raw = learner::dense_stack(params, "f2", meta.config.f2_hidden.size() + 1, latent);
  const std::size_t w = learner::PredictorLayout(meta.config).size();
  if (raw.size() != w)
    throw ValidationError("f2 produces " + std::to_string(raw.size()) + " weights, predictor needs " +
                          std::to_string(w));
  return scale(raw, meta.config.f2_gain);
}

MetaForward meta_forward(const BoundParameters& params, const MetaParams& meta, Var grid, Var task_points,
                         SamplingMode mode, RandomStream& rng) {
  MetaForward f;
  f.embedding = learner::embed_shape(params, meta.config, grid);
  f.distribution = estimate_task_distribution(params, meta, f.embedding, task_points);
  f.latent = sample_latent(f.distribution.mu, f.distribution.log_variance, mode, rng);
  f.theta_m = predict_learner_weights(params, meta, f.latent);
  return f;
}

Tensor task_points(const geometry::ShapeRecord& record, const ArchitectureConfig& config) {
  const std::size_t n = std::min(config.task_points, record.cloud.size());
  return learner::points_tensor(std::span(record.cloud.points).first(n));
}

ShapeWeights predict_shape_weights(const MetaParams& meta, const geometry::ShapeRecord& record) {
  if (record.grid.resolution() != meta.config.resolution)
    throw ValidationError("shape '" + record.id + "' has resolution " + std::to_string(record.grid.resolution()) +
                          ", architecture expects " + std::to_string(meta.config.resolution));
  Graph g;
  BoundParameters params(meta.params, g, false);
  RandomStream unused(0, "deterministic");
  const MetaForward f = meta_forward(params, meta, g.constant(learner::grid_tensor(record.grid)),
                                     g.constant(task_points(record, meta.config)), SamplingMode::deterministic, unused);
  return {f.embedding.value(), f.theta_m.value()};
}

}  // namespace m3dseg::metalearner
