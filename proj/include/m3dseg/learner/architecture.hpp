#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "m3dseg/common/errors.hpp"

namespace m3dseg::learner {

/// Layer widths of the encoder, the per-point predictor and the meta-learner
/// heads. Every conv layer uses kernel 4, stride 2, padding 1, so the stack
/// halves the grid each layer and must end at 1³.
struct ArchitectureConfig {
  std::string preset = "desk";
  std::vector<std::size_t> conv_channels;
  std::size_t conv_kernel = 4;
  std::size_t conv_stride = 2;
  std::size_t conv_padding = 1;
  /// Widths of the predictor's dense layers. All but the last form g2; the
  /// last layer is g3 and its width is the branch count c.
  std::vector<std::size_t> predictor_dims;
  /// Hidden widths of each f1 head followed by the latent width v.
  std::vector<std::size_t> f1_dims;
  /// Hidden widths of f2 before its output layer of width w.
  std::vector<std::size_t> f2_hidden;
  double f2_gain = 0.1;
  std::uint32_t resolution = 16;
  /// Surface points per shape fed to f1.
  std::size_t task_points = 256;

  std::size_t embedding_dim() const { return conv_channels.back(); }
  std::size_t feature_dim() const { return embedding_dim() + 3; }
  std::size_t hidden_dim() const { return predictor_dims.size() > 1 ? predictor_dims[predictor_dims.size() - 2] : feature_dim(); }
  std::size_t branch_count() const { return predictor_dims.back(); }
  std::size_t latent_dim() const { return f1_dims.back(); }

  /// Throws ValidationError when the conv stack does not reduce the grid to
  /// 1³, when any width is zero, or when c < max_parts.
  void validate(std::size_t max_parts = 0) const;

  friend bool operator==(const ArchitectureConfig&, const ArchitectureConfig&) = default;
};

/// 4 conv layers on 16³; small predictor and heads.
ArchitectureConfig desk_preset();
/// 5 conv layers on 32³ with the published widths.
ArchitectureConfig paper_preset();
/// Throws ValidationError for unknown names.
ArchitectureConfig preset_by_name(const std::string& name);

/// Position of one dense layer of the predictor inside the flat weight vector.
/// The weight matrix [out, in] is stored row-major, followed by the bias.
struct LayerSlot {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
};

/// Shape table of the predictor g2 + g3.
class PredictorLayout {
 public:
  PredictorLayout() = default;
  explicit PredictorLayout(const ArchitectureConfig& config);

  const std::vector<LayerSlot>& layers() const { return layers_; }
  /// Total parameter count w.
  std::size_t size() const { return size_; }
  /// Number of weight and bias tensors H.
  std::size_t tensor_count() const { return 2 * layers_.size(); }
  std::size_t branch_count() const { return layers_.back().out; }

 private:
  std::vector<LayerSlot> layers_;
  std::size_t size_ = 0;
};

}  // namespace m3dseg::learner
