#include "m3dseg/learner/architecture.hpp"

namespace m3dseg::learner {

void ArchitectureConfig::validate(std::size_t max_parts) const {
  auto positive = [](const std::vector<std::size_t>& v, const char* what, bool allow_empty) {
    if (v.empty() && !allow_empty) throw ValidationError(std::string(what) + " must not be empty");
    for (auto d : v)
      if (d == 0) throw ValidationError(std::string(what) + " entries must be positive");
  };
  positive(conv_channels, "conv_channels", false);
  positive(predictor_dims, "predictor_dims", false);
  positive(f1_dims, "f1_dims", false);
  positive(f2_hidden, "f2_hidden", true);
  if (conv_kernel != 4 || conv_stride != 2 || conv_padding != 1)
    throw ValidationError("conv layers must use kernel 4, stride 2, padding 1");
  if (conv_channels.size() >= 32 || resolution != (std::uint32_t{1} << conv_channels.size()))
    throw ValidationError("resolution " + std::to_string(resolution) + " is not 2^" +
                          std::to_string(conv_channels.size()) + " for " + std::to_string(conv_channels.size()) +
                          " conv layers");
  if (branch_count() < max_parts)
    throw ValidationError("branch count " + std::to_string(branch_count()) + " is below the " +
                          std::to_string(max_parts) + " parts of the data");
  if (!(f2_gain > 0.0)) throw ValidationError("f2_gain must be positive");
  if (task_points == 0) throw ValidationError("task_points must be positive");
}

ArchitectureConfig desk_preset() {
  ArchitectureConfig c;
  c.preset = "desk";
  c.conv_channels = {16, 32, 64, 128};
  c.predictor_dims = {32, 16, 8};
  c.f1_dims = {64, 32};
  c.resolution = 16;
  return c;
}

ArchitectureConfig paper_preset() {
  ArchitectureConfig c;
  c.preset = "paper";
  c.conv_channels = {32, 64, 128, 512, 1024};
  c.predictor_dims = {1024, 256, 8};
  c.f1_dims = {1024, 256};
  c.resolution = 32;
  return c;
}

ArchitectureConfig preset_by_name(const std::string& name) {
  if (name == "desk") return desk_preset();
  if (name == "paper") return paper_preset();
  throw ValidationError("unknown architecture preset '" + name + "'");
}

PredictorLayout::PredictorLayout(const ArchitectureConfig& config) {
  std::size_t in = config.feature_dim();
  for (std::size_t out : config.predictor_dims) {
    LayerSlot s{in, out, size_, size_ + in * out};
    size_ = s.bias_offset + out;
    layers_.push_back(s);
    in = out;
  }
}

}  // namespace m3dseg::learner
