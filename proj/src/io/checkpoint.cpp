#include "m3dseg/io/checkpoint.hpp"

#include "m3dseg/io/config.hpp"

namespace m3dseg::io {

using nlohmann::ordered_json;
using numerics::ParameterSet;
using numerics::Tensor;

namespace {

constexpr std::string_view kMagic = "M3DS";

std::string hex_digest(std::uint64_t v) { return hex64(v); }

std::uint64_t parse_hex(const std::string& s) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used, 16);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("invalid digest '" + s + "'");
  }
}

}  // namespace

Bytes encode_checkpoint(const Checkpoint& c) {
  ordered_json table = ordered_json::array();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < c.tensors.size(); ++i) {
    const Tensor& t = c.tensors.tensors()[i];
    table.push_back({{"name", c.tensors.names()[i]}, {"shape", t.shape()}, {"offset", offset}, {"bytes", 4 * t.size()}});
    offset += 4 * t.size();
  }
  ordered_json header = {{"kind", c.kind},
                         {"architecture", to_json(c.architecture)},
                         {"config", c.config},
                         {"provenance", c.provenance},
                         {"extra", c.extra},
                         {"tensors", table},
                         {"payload_bytes", offset}};
  const std::string text = header.dump();
  Writer w;
  w.text(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.text(text);
  for (const Tensor& t : c.tensors.tensors())
    for (std::size_t i = 0; i < t.size(); ++i) w.f32(static_cast<float>(t.at(i)));
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& what) {
  Reader r(bytes, what);
  r.expect_magic(kMagic);
  const auto version = r.u32();
  if (version != kCheckpointVersion) throw FormatError(what + ": unsupported version " + std::to_string(version));
  const auto header_len = r.u32();
  ordered_json header;
  try {
    header = ordered_json::parse(r.text(header_len));
  } catch (const ordered_json::parse_error& e) {
    throw FormatError(what + ": invalid header: " + e.what());
  }
  Checkpoint c;
  try {
    c.kind = header.at("kind").get<std::string>();
    c.architecture = architecture_from_json(nlohmann::json(header.at("architecture")));
    c.config = header.at("config");
    c.provenance = header.at("provenance");
    c.extra = header.at("extra");
    const std::size_t payload = header.at("payload_bytes").get<std::size_t>();
    if (payload != r.remaining())
      throw FormatError(what + ": payload has " + std::to_string(r.remaining()) + " bytes, header declares " +
                        std::to_string(payload));
    std::size_t expected_offset = 0;
    for (const auto& entry : header.at("tensors")) {
      const auto shape = entry.at("shape").get<numerics::Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto nbytes = entry.at("bytes").get<std::size_t>();
      if (offset != expected_offset || nbytes != 4 * numerics::shape_size(shape))
        throw FormatError(what + ": tensor table does not tile the payload at '" +
                          entry.at("name").get<std::string>() + "'");
      Tensor t(shape, numerics::Precision::f32);
      auto data = t.data<float>();
      for (auto& v : data) v = r.f32();
      c.tensors.add(entry.at("name").get<std::string>(), std::move(t));
      expected_offset += nbytes;
    }
    if (expected_offset != payload) throw FormatError(what + ": tensor table does not cover the payload");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": malformed header: " + e.what());
  } catch (const numerics::NumericsError& e) {
    throw FormatError(what + ": " + e.what());
  }
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) { write_file(path, encode_checkpoint(c)); }

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path), path.string()); }

Checkpoint meta_checkpoint(const metalearner::MetaParams& meta, const training::TrainConfig& config,
                           std::uint64_t dataset_digest) {
  Checkpoint c;
  c.kind = "meta";
  c.architecture = meta.config;
  c.config = to_json(config);
  c.provenance = {{"seed", config.seed}, {"epochs", config.meta_epochs}, {"dataset_digest", hex_digest(dataset_digest)}};
  c.extra = {{"variant", metalearner::variant_name(meta.variant)}};
  c.tensors = meta.params;
  return c;
}

Checkpoint pretrain_checkpoint(const ParameterSet& params, const learner::ArchitectureConfig& arch,
                               const training::TrainConfig& config, std::uint64_t dataset_digest) {
  Checkpoint c;
  c.kind = "pretrain";
  c.architecture = arch;
  c.config = to_json(config);
  c.provenance = {{"seed", config.seed}, {"epochs", config.meta_epochs}, {"dataset_digest", hex_digest(dataset_digest)}};
  c.tensors = params;
  return c;
}

metalearner::MetaParams meta_from_checkpoint(const Checkpoint& c) {
  if (c.kind != "meta") throw ValidationError("expected a meta checkpoint, found kind '" + c.kind + "'");
  metalearner::MetaParams meta;
  meta.variant = metalearner::parse_variant(c.extra.value("variant", std::string("vae")));
  meta.config = c.architecture;
  meta.params = c.tensors;
  const metalearner::MetaParams fresh = metalearner::init_meta_params(meta.config, meta.variant, 0);
  if (fresh.params.names() != meta.params.names())
    throw ValidationError("meta checkpoint tensors do not match the '" + meta.config.preset + "' architecture");
  for (std::size_t i = 0; i < fresh.params.size(); ++i)
    if (fresh.params.tensors()[i].shape() != meta.params.tensors()[i].shape())
      throw ValidationError("meta checkpoint tensor '" + meta.params.names()[i] + "' has the wrong shape");
  return meta;
}

Checkpoint learner_checkpoint(const training::LearnerModel& model, const training::TrainConfig& config,
                              std::uint64_t dataset_digest, const std::string& setting) {
  Checkpoint c;
  c.kind = "learner";
  c.architecture = model.config;
  c.config = to_json(config);
  c.provenance = {{"seed", config.seed},
                  {"epochs", config.meta_epochs},
                  {"finetune_steps", config.finetune_steps},
                  {"dataset_digest", hex_digest(dataset_digest)}};
  c.extra = {{"setting", setting}, {"frozen_meta_digest", hex_digest(model.meta_digest)}, {"shapes", model.shape_ids}};
  c.tensors = model.encoder;
  c.tensors.add("learner.theta_l", model.theta_l);
  for (std::size_t i = 0; i < model.shape_ids.size(); ++i) {
    c.tensors.add("learner.theta_m." + model.shape_ids[i], model.theta_m[i]);
    c.tensors.add("learner.embedding." + model.shape_ids[i], model.embeddings[i]);
  }
  return c;
}

training::LearnerModel learner_from_checkpoint(const Checkpoint& c) {
  if (c.kind != "learner") throw ValidationError("expected a learner checkpoint, found kind '" + c.kind + "'");
  training::LearnerModel m;
  m.config = c.architecture;
  try {
    m.meta_digest = parse_hex(c.extra.at("frozen_meta_digest").get<std::string>());
    m.shape_ids = c.extra.at("shapes").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("learner checkpoint: ") + e.what());
  }
  for (const std::string& name : c.tensors.names())
    if (name.starts_with("encoder.")) m.encoder.add(name, c.tensors.get(name));
  const std::size_t w = learner::PredictorLayout(m.config).size();
  m.theta_l = c.tensors.get("learner.theta_l");
  for (const std::string& id : m.shape_ids) {
    m.theta_m.push_back(c.tensors.get("learner.theta_m." + id));
    m.embeddings.push_back(c.tensors.get("learner.embedding." + id));
  }
  if (m.theta_l.size() != w)
    throw ValidationError("learner checkpoint theta_l has " + std::to_string(m.theta_l.size()) + " entries, '" +
                          m.config.preset + "' needs " + std::to_string(w));
  for (const Tensor& t : m.theta_m)
    if (t.size() != w) throw ValidationError("learner checkpoint theta_m length differs from theta_l");
  return m;
}

void require_same_architecture(const learner::ArchitectureConfig& expected, const learner::ArchitectureConfig& found) {
  if (!(expected == found))
    throw ValidationError("architecture mismatch: config uses preset '" + expected.preset + "' but checkpoint uses '" +
                          found.preset + "'" + (expected.preset == found.preset ? " with different widths" : ""));
}

}  // namespace m3dseg::io
