#include "m3dseg/training/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "m3dseg/numerics/adam.hpp"
#include "m3dseg/numerics/ops.hpp"

namespace m3dseg::training {

using namespace numerics;
using learner::ArchitectureConfig;
using metalearner::MetaParams;
using metalearner::SamplingMode;

namespace {

constexpr double kDivergenceFactor = 10.0;
constexpr std::size_t kDivergencePatience = 50;

class DivergenceGuard {
 public:
  void observe(double loss, const std::string& where) {
    if (!std::isfinite(loss)) throw DivergenceError(where + ": loss is not finite");
    if (!initial_) initial_ = loss;
    above_ = loss > kDivergenceFactor * *initial_ ? above_ + 1 : 0;
    if (above_ >= kDivergencePatience)
      throw DivergenceError(where + ": loss above " + std::to_string(kDivergenceFactor) + "x its initial value " +
                            std::to_string(*initial_) + " for " + std::to_string(kDivergencePatience) + " steps");
  }

 private:
  std::optional<double> initial_;
  std::size_t above_ = 0;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

AdamConfig adam_config(const TrainConfig& c) {
  AdamConfig a;
  a.learning_rate = c.learning_rate;
  return a;
}

Var predictor_loss(const learner::PredictorLayout& layout, Var theta, Var embedding, Graph& g, const ShapeTask& task) {
  const learner::PredictorOutput out = learner::run_predictor(layout, theta, embedding, g.constant(task.sample_points));
  return reconstruction_loss(out.occupancy.value, task.labels);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ValidationError("learning_rate must be positive, got " + std::to_string(learning_rate));
  if (meta_epochs == 0) throw ValidationError("meta_epochs must be positive");
  if (batch == 0) throw ValidationError("batch must be positive");
  if (!(kl_weight >= 0.0) || !std::isfinite(kl_weight)) throw ValidationError("kl_weight must be >= 0");
}

std::string TrainReport::json_lines() const {
  std::string out;
  for (const EpochRecord& e : epochs)
    out += nlohmann::json{{"epoch", e.epoch}, {"loss", e.loss}, {"seconds", e.seconds}}.dump() + "\n";
  return out;
}

ShapeTask make_task(const geometry::ShapeRecord& record, const ArchitectureConfig& config) {
  if (record.grid.resolution() != config.resolution)
    throw ValidationError("shape '" + record.id + "' has resolution " + std::to_string(record.grid.resolution()) +
                          ", architecture '" + config.preset + "' expects " + std::to_string(config.resolution));
  ShapeTask t;
  t.id = record.id;
  t.grid = learner::grid_tensor(record.grid);
  t.task_points = metalearner::task_points(record, config);
  const std::size_t n = record.grid.cell_count();
  t.sample_points = Tensor({n, 3});
  t.labels = Tensor({n});
  for (std::size_t c = 0; c < n; ++c) {
    const geometry::Vec3 p = record.grid.cell_center(c);
    t.sample_points.set(3 * c, p.x);
    t.sample_points.set(3 * c + 1, p.y);
    t.sample_points.set(3 * c + 2, p.z);
    t.labels.set(c, record.grid.values()[c]);
  }
  return t;
}

std::vector<ShapeTask> make_tasks(std::span<const geometry::ShapeRecord* const> records,
                                  const ArchitectureConfig& config) {
  std::vector<ShapeTask> tasks;
  for (const auto* r : records) tasks.push_back(make_task(*r, config));
  return tasks;
}

Var reconstruction_loss(Var occupancy, const Tensor& labels) {
  if (occupancy.size() == 0) throw ValidationError("reconstruction loss needs at least one sample");
  if (occupancy.size() != labels.size())
    throw ValidationError("reconstruction loss: " + std::to_string(occupancy.size()) + " predictions for " +
                          std::to_string(labels.size()) + " labels");
  return mean_squared_error(reshape(occupancy, labels.shape()), labels);
}

double reconstruction_loss(std::span<const double> predictions, std::span<const geometry::OccupancySample> samples) {
  if (samples.empty()) throw ValidationError("reconstruction loss needs at least one sample");
  if (predictions.size() != samples.size())
    throw ValidationError("reconstruction loss: " + std::to_string(predictions.size()) + " predictions for " +
                          std::to_string(samples.size()) + " samples");
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double r = predictions[i] - samples[i].label;
    total += r * r;
  }
  return total / static_cast<double>(samples.size());
}

Var kl_term(Var mu, Var log_variance) {
  Var terms = sub(add(mul(mu, mu), numerics::exp(log_variance)), log_variance);
  return scale(add_scalar(sum(terms), -static_cast<double>(mu.size())), 0.5);
}

double kl_term(std::span<const double> mu, std::span<const double> log_variance) {
  if (mu.size() != log_variance.size()) throw ValidationError("kl_term: length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    total += mu[i] * mu[i] + std::exp(log_variance[i]) - log_variance[i] - 1.0;
  return 0.5 * total;
}

TrainReport train_epochs(ParameterSet& params, std::span<const ShapeTask> tasks, const TrainConfig& config,
                         std::size_t epochs, const std::string& stream, const ShapeLoss& loss) {
  if (tasks.empty()) throw ValidationError(stream + ": no training shapes");
  config.validate();
  FlushDenormalsScope flush;
  AdamState adam(adam_config(config));
  RandomStream order_rng(config.seed, stream + "/order");
  RandomStream sample_rng(config.seed, stream + "/latent");
  DivergenceGuard guard;
  TrainReport report;
  std::vector<std::size_t> order(tasks.size());
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    order_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t steps = 0;
    for (std::size_t first = 0; first < order.size(); first += config.batch) {
      const std::size_t last = std::min(order.size(), first + config.batch);
      Graph g;
      BoundParameters bound(params, g, true);
      Var total;
      for (std::size_t i = first; i < last; ++i) {
        Var l = loss(g, bound, tasks[order[i]], sample_rng);
        total = total.valid() ? add(total, l) : l;
      }
      total = scale(total, 1.0 / static_cast<double>(last - first));
      const double value = total.value().item();
      guard.observe(value, stream + " epoch " + std::to_string(epoch));
      g.backward(total);
      std::vector<Tensor> grads;
      grads.reserve(bound.vars().size());
      for (Var v : bound.vars()) grads.push_back(g.grad(v));
      adam_step(params.tensors(), grads, adam);
      epoch_loss += value;
      ++steps;
    }
    report.epochs.push_back({epoch, epoch_loss / static_cast<double>(steps), seconds_since(start)});
  }
  report.final_loss = report.epochs.back().loss;
  return report;
}

Var meta_loss(Graph& g, const BoundParameters& params, const MetaParams& meta, const ShapeTask& task,
              SamplingMode mode, double kl_weight, RandomStream& rng) {
  const metalearner::MetaForward f =
      metalearner::meta_forward(params, meta, g.constant(task.grid), g.constant(task.task_points), mode, rng);
  Var l = predictor_loss(learner::PredictorLayout(meta.config), f.theta_m, f.embedding, g, task);
  if (kl_weight > 0.0 && f.distribution.log_variance.valid())
    l = add(l, scale(kl_term(f.distribution.mu, f.distribution.log_variance), kl_weight));
  return l;
}

TrainReport meta_train(MetaParams& meta, std::span<const ShapeTask> tasks, const TrainConfig& config) {
  const SamplingMode mode = config.stochastic_latent ? SamplingMode::stochastic : SamplingMode::deterministic;
  return train_epochs(meta.params, tasks, config, config.meta_epochs, "meta_train",
                      [&](Graph& g, const BoundParameters& p, const ShapeTask& t, RandomStream& rng) {
                        return meta_loss(g, p, meta, t, mode, config.kl_weight, rng);
                      });
}

std::size_t LearnerModel::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < shape_ids.size(); ++i)
    if (shape_ids[i] == id) return i;
  throw ValidationError("shape '" + id + "' is not part of the fine-tuned model");
}

TrainReport fine_tune(LearnerModel& model, std::span<const ShapeTask> targets, const TrainConfig& config) {
  if (targets.empty()) throw ValidationError("fine-tune: no target shapes");
  if (targets.size() != model.shape_ids.size()) throw ValidationError("fine-tune: targets do not match the model");
  config.validate();
  const learner::PredictorLayout layout(model.config);
  FlushDenormalsScope flush;
  AdamState adam(adam_config(config));
  DivergenceGuard guard;
  TrainReport report;
  std::vector<Tensor> theta{model.theta_l};
  for (std::size_t step = 0; step < config.finetune_steps; ++step) {
    const auto start = std::chrono::steady_clock::now();
    Graph g;
    Tensor leaf = theta[0];
    leaf.set_requires_grad(true);
    Var theta_l = g.leaf(std::move(leaf));
    Var total;
    for (std::size_t s = 0; s < targets.size(); ++s) {
      Var w = add(g.constant(model.theta_m[s]), theta_l);
      Var l = predictor_loss(layout, w, g.constant(model.embeddings[s]), g, targets[s]);
      total = total.valid() ? add(total, l) : l;
    }
    total = scale(total, 1.0 / static_cast<double>(targets.size()));
    const double value = total.value().item();
    guard.observe(value, "fine-tune step " + std::to_string(step + 1));
    g.backward(total);
    const std::vector<Tensor> grads{g.grad(theta_l)};
    adam_step(theta, grads, adam);
    report.epochs.push_back({step + 1, value, seconds_since(start)});
  }
  model.theta_l = theta[0];
  report.final_loss = report.epochs.empty() ? 0.0 : report.epochs.back().loss;
  return report;
}

LearnerModel fine_tune_meta(const MetaParams& meta, std::span<const geometry::ShapeRecord* const> targets,
                            const TrainConfig& config, TrainReport* report) {
  LearnerModel model;
  model.config = meta.config;
  for (const std::string& name : meta.params.names())
    if (name.starts_with("encoder.")) model.encoder.add(name, meta.params.get(name));
  for (const auto* r : targets) {
    metalearner::ShapeWeights w = metalearner::predict_shape_weights(meta, *r);
    model.shape_ids.push_back(r->id);
    model.embeddings.push_back(std::move(w.embedding));
    model.theta_m.push_back(std::move(w.theta_m));
  }
  model.theta_l = Tensor({learner::PredictorLayout(meta.config).size()});
  model.meta_digest = digest(meta.params);
  const std::vector<ShapeTask> tasks = make_tasks(targets, meta.config);
  TrainReport r = fine_tune(model, tasks, config);
  if (report) *report = std::move(r);
  return model;
}

ParameterSet init_pretrain_params(const ArchitectureConfig& config, std::uint64_t seed) {
  config.validate();
  RandomStream rng(seed, "init/pretrain");
  RandomStream enc_rng = rng.fork("encoder");
  ParameterSet params = learner::init_encoder(config, enc_rng);
  // Zero predictor weights would leave every hidden unit dead.
  RandomStream theta_rng(seed, "init/predictor");
  Tensor theta = learner::init_predictor_weights(learner::PredictorLayout(config), theta_rng);
  params.add("learner.theta_l", std::move(theta));
  return params;
}

TrainReport pretrain_learner(ParameterSet& params, const ArchitectureConfig& config, std::span<const ShapeTask> tasks,
                             const TrainConfig& train) {
  const learner::PredictorLayout layout(config);
  return train_epochs(params, tasks, train, train.meta_epochs, "pretrain",
                      [&](Graph& g, const BoundParameters& p, const ShapeTask& t, RandomStream&) {
                        Var embedding = learner::embed_shape(p, config, g.constant(t.grid));
                        return predictor_loss(layout, p["learner.theta_l"], embedding, g, t);
                      });
}

LearnerModel fine_tune_pretrained(const ParameterSet& params, const ArchitectureConfig& config,
                                  std::span<const geometry::ShapeRecord* const> targets, const TrainConfig& train,
                                  TrainReport* report) {
  LearnerModel model;
  model.config = config;
  for (const std::string& name : params.names())
    if (name.starts_with("encoder.")) model.encoder.add(name, params.get(name));
  const std::size_t w = learner::PredictorLayout(config).size();
  for (const auto* r : targets) {
    model.shape_ids.push_back(r->id);
    model.embeddings.push_back(learner::embed_shape(r->grid, model.encoder, config));
    model.theta_m.push_back(Tensor({w}));
  }
  model.theta_l = params.get("learner.theta_l");
  model.meta_digest = digest(params);
  const std::vector<ShapeTask> tasks = make_tasks(targets, config);
  TrainReport r = fine_tune(model, tasks, train);
  if (report) *report = std::move(r);
  return model;
}

std::string setting_name(Setting s) {
  switch (s) {
    case Setting::A: return "A";
    case Setting::B: return "B";
    case Setting::C: return "C";
  }
  return "?";
}

Setting parse_setting(const std::string& name) {
  if (name == "A") return Setting::A;
  if (name == "B") return Setting::B;
  if (name == "C") return Setting::C;
  throw ValidationError("unknown weight setting '" + name + "' (expected A, B or C)");
}

SettingRun run_weight_setting(Setting setting, std::span<const geometry::ShapeRecord* const> train,
                              std::span<const geometry::ShapeRecord* const> targets, const ArchitectureConfig& arch,
                              const TrainConfig& config) {
  config.validate();
  const std::vector<ShapeTask> tasks = make_tasks(train, arch);
  SettingRun run;
  run.setting = setting;
  if (setting == Setting::A) {
    ParameterSet params = init_pretrain_params(arch, config.seed);
    run.train_report = pretrain_learner(params, arch, tasks, config);
    run.model = fine_tune_pretrained(params, arch, targets, config, &run.finetune_report);
  } else {
    const auto variant = setting == Setting::B ? metalearner::Variant::deterministic : metalearner::Variant::vae;
    MetaParams meta = metalearner::init_meta_params(arch, variant, config.seed);
    run.train_report = meta_train(meta, tasks, config);
    run.model = fine_tune_meta(meta, targets, config, &run.finetune_report);
  }
  return run;
}

}  // namespace m3dseg::training
