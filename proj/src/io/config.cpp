#include "m3dseg/io/config.hpp"

#include <set>

#include "m3dseg/common/binary_io.hpp"

namespace m3dseg::io {

using nlohmann::json;

namespace {

template <class T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config key '" + key + "' has the wrong type");
  }
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!allowed.contains(key)) throw ValidationError("unknown config key '" + where + key + "'");
}

std::size_t positive_count(const json& j, const std::string& key) {
  if (!j.is_number_integer() || j.get<long long>() < 0)
    throw ValidationError("config key '" + key + "' must be a non-negative integer");
  return j.get<std::size_t>();
}

}  // namespace

nlohmann::ordered_json to_json(const learner::ArchitectureConfig& a) {
  return {{"preset", a.preset},          {"conv_channels", a.conv_channels}, {"predictor_dims", a.predictor_dims},
          {"f1_dims", a.f1_dims},        {"f2_hidden", a.f2_hidden},         {"f2_gain", a.f2_gain},
          {"resolution", a.resolution},  {"task_points", a.task_points}};
}

learner::ArchitectureConfig architecture_from_json(const json& j) {
  reject_unknown(j, {"preset", "conv_channels", "predictor_dims", "f1_dims", "f2_hidden", "f2_gain", "resolution", "task_points"},
                 "architecture.");
  const std::string preset = j.contains("preset") ? get_as<std::string>(j["preset"], "architecture.preset") : "desk";
  learner::ArchitectureConfig a;
  if (preset == "desk" || preset == "paper") {
    a = learner::preset_by_name(preset);
  } else {
    // A custom preset name is only accepted with every field spelled out.
    for (const char* key : {"conv_channels", "predictor_dims", "f1_dims", "f2_hidden", "f2_gain", "resolution", "task_points"})
      if (!j.contains(key))
        throw ValidationError("architecture preset '" + preset + "' is not built in, so '" + key + "' is required");
    a.preset = preset;
  }
  using Dims = std::vector<std::size_t>;
  if (j.contains("conv_channels")) a.conv_channels = get_as<Dims>(j["conv_channels"], "architecture.conv_channels");
  if (j.contains("predictor_dims")) a.predictor_dims = get_as<Dims>(j["predictor_dims"], "architecture.predictor_dims");
  if (j.contains("f1_dims")) a.f1_dims = get_as<Dims>(j["f1_dims"], "architecture.f1_dims");
  if (j.contains("f2_hidden")) a.f2_hidden = get_as<Dims>(j["f2_hidden"], "architecture.f2_hidden");
  if (j.contains("f2_gain")) a.f2_gain = get_as<double>(j["f2_gain"], "architecture.f2_gain");
  if (j.contains("resolution")) a.resolution = get_as<std::uint32_t>(j["resolution"], "architecture.resolution");
  if (j.contains("task_points")) a.task_points = positive_count(j["task_points"], "architecture.task_points");
  a.validate();
  return a;
}

nlohmann::ordered_json to_json(const training::TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"meta_epochs", c.meta_epochs}, {"finetune_steps", c.finetune_steps},
          {"batch", c.batch},                 {"seed", c.seed},               {"kl_weight", c.kl_weight},
          {"stochastic_latent", c.stochastic_latent}, {"preset", c.preset}};
}

RunConfig parse_run_config(const json& j) {
  reject_unknown(j,
                 {"learning_rate", "meta_epochs", "finetune_steps", "batch", "seed", "kl_weight", "stochastic_latent",
                  "preset", "architecture", "setting", "train_data", "target_data"},
                 "");
  RunConfig rc;
  auto& t = rc.train;
  if (j.contains("learning_rate")) {
    if (!j["learning_rate"].is_number()) throw ValidationError("config key 'learning_rate' must be a number");
    t.learning_rate = j["learning_rate"].get<double>();
  }
  if (j.contains("meta_epochs")) t.meta_epochs = positive_count(j["meta_epochs"], "meta_epochs");
  if (j.contains("finetune_steps")) t.finetune_steps = positive_count(j["finetune_steps"], "finetune_steps");
  if (j.contains("batch")) t.batch = positive_count(j["batch"], "batch");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ValidationError("config key 'seed' must be a non-negative integer");
    t.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("kl_weight")) {
    if (!j["kl_weight"].is_number()) throw ValidationError("config key 'kl_weight' must be a number");
    t.kl_weight = j["kl_weight"].get<double>();
  }
  if (j.contains("stochastic_latent")) t.stochastic_latent = get_as<bool>(j["stochastic_latent"], "stochastic_latent");
  json arch = j.contains("architecture") ? j["architecture"] : json::object();
  if (j.contains("preset")) {
    t.preset = get_as<std::string>(j["preset"], "preset");
    if (arch.contains("preset") && arch["preset"] != t.preset)
      throw ValidationError("config 'preset' and 'architecture.preset' disagree");
    arch["preset"] = t.preset;
  }
  rc.architecture = architecture_from_json(arch);
  t.preset = rc.architecture.preset;
  if (j.contains("setting")) {
    rc.setting = get_as<std::string>(j["setting"], "setting");
    training::parse_setting(rc.setting);
  }
  if (j.contains("train_data")) rc.train_data = get_as<std::string>(j["train_data"], "train_data");
  if (j.contains("target_data")) rc.target_data = get_as<std::string>(j["target_data"], "target_data");
  try {
    t.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": invalid JSON: " + e.what());
  }
  return parse_run_config(j);
}

}  // namespace m3dseg::io
