#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "m3dseg/learner/architecture.hpp"
#include "m3dseg/training/training.hpp"

namespace m3dseg::io {

/// Run configuration file. Top-level keys: learning_rate, meta_epochs,
/// finetune_steps, batch, seed, kl_weight, stochastic_latent, preset,
/// architecture (overrides of preset fields), setting, train_data,
/// target_data. Every key is optional; unknown keys are rejected.
struct RunConfig {
  training::TrainConfig train;
  learner::ArchitectureConfig architecture = learner::desk_preset();
  std::string setting = "C";
  std::optional<std::string> train_data;
  std::optional<std::string> target_data;
};

/// Parses and validates; throws ValidationError naming the offending key.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::ordered_json to_json(const learner::ArchitectureConfig& a);
learner::ArchitectureConfig architecture_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const training::TrainConfig& c);

}  // namespace m3dseg::io
