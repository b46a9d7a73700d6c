#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "m3dseg/common/binary_io.hpp"
#include "m3dseg/metalearner/metalearner.hpp"
#include "m3dseg/numerics/parameters.hpp"
#include "m3dseg/training/training.hpp"

namespace m3dseg::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "M3DS", u32 version, u32 header length, JSON header, f32 payload.
///
/// The header holds `kind`, `architecture`, `config`, `provenance`, `extra`
/// and the tensor table `tensors` of {name, shape, offset, bytes} entries
/// whose byte ranges tile the payload in order.
struct Checkpoint {
  std::string kind;
  learner::ArchitectureConfig architecture;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  nlohmann::ordered_json provenance = nlohmann::ordered_json::object();
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
  numerics::ParameterSet tensors;
};

Bytes encode_checkpoint(const Checkpoint& c);
/// Throws FormatError on bad magic, version, table or payload size.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& what = "checkpoint");
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// kind "meta" (settings B, C) or "pretrain" (setting A).
Checkpoint meta_checkpoint(const metalearner::MetaParams& meta, const training::TrainConfig& config,
                           std::uint64_t dataset_digest);
Checkpoint pretrain_checkpoint(const numerics::ParameterSet& params, const learner::ArchitectureConfig& arch,
                               const training::TrainConfig& config, std::uint64_t dataset_digest);
metalearner::MetaParams meta_from_checkpoint(const Checkpoint& c);

/// kind "learner": encoder, learner.theta_l, learner.theta_m.<id> and
/// learner.embedding.<id>, plus the frozen-meta digest.
Checkpoint learner_checkpoint(const training::LearnerModel& model, const training::TrainConfig& config,
                              std::uint64_t dataset_digest, const std::string& setting);
training::LearnerModel learner_from_checkpoint(const Checkpoint& c);

/// Throws ValidationError naming both presets when they differ.
void require_same_architecture(const learner::ArchitectureConfig& expected, const learner::ArchitectureConfig& found);

}  // namespace m3dseg::io
