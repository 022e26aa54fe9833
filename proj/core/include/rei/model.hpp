// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rei/tape.hpp"
#include "rei/tensor.hpp"

namespace rei {

/// Shape of the residual encoder-decoder G.
///
/// Level l of the encoder runs `convs_per_level` conv3x3+ReLU blocks with
/// width·2^l channels, then average-pools. The decoder mirrors it with
/// nearest-neighbour upsampling and channel-concatenated skips. A final
/// conv3x3 maps back to `in_channels`, optionally added to the input.
struct ModelSpec {
  std::size_t in_channels = 1;
  std::size_t width = 8;
  std::size_t depth = 2;
  std::size_t convs_per_level = 2;
  bool residual = true;

  bool operator==(const ModelSpec&) const = default;
};

enum class LayerKind { conv3x3, relu, avg_pool, upsample, push_skip, concat_skip, residual_add };

struct Layer {
  LayerKind kind;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t param_offset = 0;  // conv3x3 only
};

/// Expands a spec into its layer sequence; parameter offsets are assigned in order.
std::vector<Layer> build_layers(const ModelSpec& spec);
std::size_t parameter_count(const ModelSpec& spec);
std::string to_string(LayerKind kind);

/// Image-to-image reconstructor G: [C,H,W] -> [C,H,W].
class ReconModel {
 public:
  /// All parameters zero.
  explicit ReconModel(ModelSpec spec);
  ReconModel(ModelSpec spec, Tensor params);

  /// Kaiming-uniform (fan-in) conv weights, zero biases, zero final conv.
  static ReconModel initialized(const ModelSpec& spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  const std::vector<Layer>& layers() const { return layers_; }
  const Tensor& params() const { return params_; }
  Tensor& params() { return params_; }
  std::size_t param_count() const { return params_.size(); }

  /// Records G(x) on `tape`, reading weights from the `params` node.
  Var apply(Var params, Var x) const;
  /// Evaluates G(x) with the model's own parameters.
  Tensor apply(const Tensor& x) const;

  /// Throws ShapeError unless x is [C,H,W] with H,W divisible by 2^depth.
  void check_input(const Tensor& x) const;

 private:
  ModelSpec spec_;
  std::vector<Layer> layers_;
  Tensor params_;
};

}  // namespace rei
