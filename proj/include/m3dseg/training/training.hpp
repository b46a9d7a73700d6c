#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "m3dseg/geometry/dataset.hpp"
#include "m3dseg/learner/learner.hpp"
#include "m3dseg/metalearner/metalearner.hpp"
#include "m3dseg/numerics/graph.hpp"

namespace m3dseg::training {

/// Raised when a loss turns non-finite or stays far above its start.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t meta_epochs = 200;
  std::size_t finetune_steps = 200;
  /// Shapes per meta step.
  std::size_t batch = 4;
  std::uint64_t seed = 0;
  double kl_weight = 0.0;
  /// Sample the latent during meta-training; off uses the mean.
  bool stochastic_latent = true;
  std::string preset = "desk";

  /// Throws ValidationError on non-positive counts or learning rate.
  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double final_loss = 0.0;
  std::string checkpoint_digest;

  /// One `{"epoch":..,"loss":..,"seconds":..}` object per line.
  std::string json_lines() const;
};

/// Per-shape training tensors: the grid, the f1 task points, every grid cell
/// center and its occupancy label.
struct ShapeTask {
  std::string id;
  numerics::Tensor grid;
  numerics::Tensor task_points;
  numerics::Tensor sample_points;
  numerics::Tensor labels;
};

/// Throws ValidationError when the record's resolution differs from the
/// architecture's.
ShapeTask make_task(const geometry::ShapeRecord& record, const learner::ArchitectureConfig& config);
std::vector<ShapeTask> make_tasks(std::span<const geometry::ShapeRecord* const> records,
                                  const learner::ArchitectureConfig& config);

/// Mean over samples of (f(x) - y)².
numerics::Var reconstruction_loss(numerics::Var occupancy, const numerics::Tensor& labels);
double reconstruction_loss(std::span<const double> predictions, std::span<const geometry::OccupancySample> samples);

/// ½ Σ (μ² + σ² − log σ² − 1) with log σ² given.
numerics::Var kl_term(numerics::Var mu, numerics::Var log_variance);
double kl_term(std::span<const double> mu, std::span<const double> log_variance);

/// Loss of one shape given the bound trainable parameters.
using ShapeLoss = std::function<numerics::Var(numerics::Graph&, const numerics::BoundParameters&, const ShapeTask&,
                                              numerics::RandomStream&)>;

/// Adam over `params` for `epochs` passes; each pass shuffles the tasks and
/// steps once per batch on the mean batch loss. Throws DivergenceError.
TrainReport train_epochs(numerics::ParameterSet& params, std::span<const ShapeTask> tasks, const TrainConfig& config,
                         std::size_t epochs, const std::string& stream, const ShapeLoss& loss);

/// Meta-training of every parameter of `meta` with theta_l fixed at zero.
TrainReport meta_train(metalearner::MetaParams& meta, std::span<const ShapeTask> tasks, const TrainConfig& config);

/// The loss meta_train minimizes for one shape.
numerics::Var meta_loss(numerics::Graph& g, const numerics::BoundParameters& params, const metalearner::MetaParams& meta,
                        const ShapeTask& task, metalearner::SamplingMode mode, double kl_weight,
                        numerics::RandomStream& rng);

/// Everything needed to segment the shapes of one target set.
struct LearnerModel {
  learner::ArchitectureConfig config;
  numerics::ParameterSet encoder;
  std::vector<std::string> shape_ids;
  std::vector<numerics::Tensor> embeddings;
  std::vector<numerics::Tensor> theta_m;
  numerics::Tensor theta_l;
  /// Digest of the frozen meta-learner (or pretrained encoder).
  std::uint64_t meta_digest = 0;

  learner::LearnerWeights weights(std::size_t shape) const { return {theta_m.at(shape), theta_l}; }
  std::size_t index_of(const std::string& id) const;
};

/// Trains only theta_l, starting from `theta_l`, on the target shapes with
/// their frozen embeddings and theta_m. One step uses every target.
TrainReport fine_tune(LearnerModel& model, std::span<const ShapeTask> targets, const TrainConfig& config);

/// Freezes `meta`, computes each target's theta_m in deterministic mode and
/// fine-tunes theta_l from zero.
LearnerModel fine_tune_meta(const metalearner::MetaParams& meta, std::span<const geometry::ShapeRecord* const> targets,
                            const TrainConfig& config, TrainReport* report = nullptr);

/// Encoder plus a directly trained predictor weight vector `learner.theta_l`.
numerics::ParameterSet init_pretrain_params(const learner::ArchitectureConfig& config, std::uint64_t seed);
TrainReport pretrain_learner(numerics::ParameterSet& params, const learner::ArchitectureConfig& config,
                             std::span<const ShapeTask> tasks, const TrainConfig& config_train);
/// theta_m = 0, theta_l continues from the pretrained vector.
LearnerModel fine_tune_pretrained(const numerics::ParameterSet& params, const learner::ArchitectureConfig& config,
                                  std::span<const geometry::ShapeRecord* const> targets, const TrainConfig& train,
                                  TrainReport* report = nullptr);

/// A: conventional pretraining, B: deterministic meta-learner, C: VAE meta-learner.
enum class Setting { A, B, C };
std::string setting_name(Setting s);
Setting parse_setting(const std::string& name);

struct SettingRun {
  Setting setting = Setting::C;
  LearnerModel model;
  TrainReport train_report;
  TrainReport finetune_report;
};

/// Trains on `train`, fine-tunes on `targets`; every setting shares the
/// architecture, budgets and seed.
SettingRun run_weight_setting(Setting setting, std::span<const geometry::ShapeRecord* const> train,
                              std::span<const geometry::ShapeRecord* const> targets,
                              const learner::ArchitectureConfig& arch, const TrainConfig& config);

}  // namespace m3dseg::training
