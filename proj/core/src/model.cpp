// SPDX-License-Identifier: Apache-2.0
#include "rei/model.hpp"

#include <cmath>

#include "rei/errors.hpp"
#include "rei/ops.hpp"
#include "rei/rng.hpp"

namespace rei {

namespace {

void validate(const ModelSpec& spec) {
  if (spec.in_channels == 0 || spec.width == 0 || spec.convs_per_level == 0) {
    throw ShapeError("model spec: channels, width and convs_per_level must be positive");
  }
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv3x3: return "conv3x3";
    case LayerKind::relu: return "relu";
    case LayerKind::avg_pool: return "avg_pool";
    case LayerKind::upsample: return "upsample";
    case LayerKind::push_skip: return "push_skip";
    case LayerKind::concat_skip: return "concat_skip";
    case LayerKind::residual_add: return "residual_add";
  }
  return "?";
}

std::vector<Layer> build_layers(const ModelSpec& spec) {
  validate(spec);
  std::vector<Layer> layers;
  std::size_t offset = 0;
  auto conv = [&](std::size_t cin, std::size_t cout) {
    layers.push_back({LayerKind::conv3x3, cin, cout, offset});
    offset += cout * cin * 9 + cout;
  };
  auto block = [&](std::size_t cin, std::size_t cout) {
    for (std::size_t k = 0; k < spec.convs_per_level; ++k) {
      conv(k == 0 ? cin : cout, cout);
      layers.push_back({LayerKind::relu, cout, cout, 0});
    }
  };

  std::vector<std::size_t> widths(spec.depth + 1);
  for (std::size_t l = 0; l <= spec.depth; ++l) widths[l] = spec.width << l;

  std::size_t channels = spec.in_channels;
  for (std::size_t l = 0; l < spec.depth; ++l) {
    block(channels, widths[l]);
    channels = widths[l];
    layers.push_back({LayerKind::push_skip, channels, channels, 0});
    layers.push_back({LayerKind::avg_pool, channels, channels, 0});
  }
  block(channels, widths[spec.depth]);
  channels = widths[spec.depth];
  for (std::size_t l = spec.depth; l-- > 0;) {
    layers.push_back({LayerKind::upsample, channels, channels, 0});
    layers.push_back({LayerKind::concat_skip, channels, channels + widths[l], 0});
    block(channels + widths[l], widths[l]);
    channels = widths[l];
  }
  conv(channels, spec.in_channels);
  if (spec.residual) layers.push_back({LayerKind::residual_add, spec.in_channels, spec.in_channels, 0});
  return layers;
}

std::size_t parameter_count(const ModelSpec& spec) {
  std::size_t n = 0;
  for (const Layer& layer : build_layers(spec)) {
    if (layer.kind == LayerKind::conv3x3) n += layer.out_channels * layer.in_channels * 9 + layer.out_channels;
  }
  return n;
}

ReconModel::ReconModel(ModelSpec spec)
    : spec_(spec), layers_(build_layers(spec)), params_(Tensor::Shape{parameter_count(spec)}) {}

ReconModel::ReconModel(ModelSpec spec, Tensor params) : ReconModel(spec) {
  if (params.size() != params_.size()) {
    throw ShapeError("model expects " + std::to_string(params_.size()) + " parameters, got " +
                     std::to_string(params.size()));
  }
  params_ = params.reshaped({params.size()});
}

ReconModel ReconModel::initialized(const ModelSpec& spec, std::uint64_t seed) {
  ReconModel model(spec);
  RngStream rng(seed, StreamKey{0, 0, Purpose::init});
  const Layer* last_conv = nullptr;
  for (const Layer& layer : model.layers_) {
    if (layer.kind == LayerKind::conv3x3) last_conv = &layer;
  }
  for (const Layer& layer : model.layers_) {
    if (layer.kind != LayerKind::conv3x3 || &layer == last_conv) continue;
    const double fan_in = static_cast<double>(layer.in_channels * 9);
    const double bound = std::sqrt(6.0 / fan_in);
    const std::size_t nweights = layer.out_channels * layer.in_channels * 9;
    for (std::size_t i = 0; i < nweights; ++i) {
      model.params_[layer.param_offset + i] = bound * (2.0 * rng.uniform() - 1.0);
    }
  }
  return model;
}

void ReconModel::check_input(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(0) != spec_.in_channels) {
    throw ShapeError("model expects [" + std::to_string(spec_.in_channels) + ",H,W] input, got " +
                     shape_string(x.shape()));
  }
  const std::size_t factor = std::size_t{1} << spec_.depth;
  if (x.dim(1) % factor || x.dim(2) % factor) {
    throw ShapeError("model input extents must be divisible by " + std::to_string(factor) + ", got " +
                     shape_string(x.shape()));
  }
}

Var ReconModel::apply(Var params, Var x) const {
  check_input(x.value());
  if (params.value().size() != params_.size()) throw ShapeError("parameter node has the wrong size");
  std::vector<Var> skips;
  Var h = x;
  for (const Layer& layer : layers_) {
    switch (layer.kind) {
      case LayerKind::conv3x3:
        h = ad::conv3x3(h, params, layer.param_offset, layer.in_channels, layer.out_channels);
        break;
      case LayerKind::relu: h = ad::relu(h); break;
      case LayerKind::avg_pool: h = ad::avg_pool2(h); break;
      case LayerKind::upsample: h = ad::upsample2(h); break;
      case LayerKind::push_skip: skips.push_back(h); break;
      case LayerKind::concat_skip:
        h = ad::concat_channels(h, skips.back());
        skips.pop_back();
        break;
      case LayerKind::residual_add: h = ad::add(h, x); break;
    }
  }
  return h;
}

Tensor ReconModel::apply(const Tensor& x) const {
  Tape tape;
  Var p = tape.constant(params_);
  Var in = tape.constant(x);
  return apply(p, in).value();
}

}  // namespace rei
