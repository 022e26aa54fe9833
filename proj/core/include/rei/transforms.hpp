// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "rei/rng.hpp"
#include "rei/tape.hpp"
#include "rei/tensor.hpp"

namespace rei {

enum class GroupKind { shift2d, rotate };

std::string to_string(GroupKind kind);
GroupKind parse_group_kind(const std::string& name);

/// Finite group of image transforms acting on [H,W] or [C,H,W] tensors.
///
/// shift2d: element g is the cyclic shift by (g / W, g % W), order H·W.
/// rotate: element g rotates by g·360/order degrees about the image center.
/// Multiples of 90° are exact pixel permutations; other angles use bilinear
/// interpolation with input and output restricted to the inscribed disk.
class TransformGroup {
 public:
  /// order 0 picks the natural order (H·W for shifts, 360 for rotations).
  TransformGroup(GroupKind kind, std::size_t height, std::size_t width, std::size_t order = 0);

  GroupKind kind() const { return kind_; }
  std::size_t order() const { return order_; }
  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }

  /// True when T_g is a pixel permutation.
  bool is_exact(std::size_t g) const;
  double angle_degrees(std::size_t g) const;

  Tensor apply(std::size_t g, const Tensor& x) const;
  /// T_gᵀ y; equals the inverse element for exact transforms.
  Tensor apply_transpose(std::size_t g, const Tensor& y) const;

  /// Element applying g1 first and then g2.
  std::size_t compose(std::size_t g1, std::size_t g2) const;
  std::size_t inverse(std::size_t g) const;

 private:
  void check_element(std::size_t g) const;
  void check_image(const Tensor& x) const;
  Tensor rotate(std::size_t g, const Tensor& x, bool transpose) const;

  GroupKind kind_;
  std::size_t h_, w_, order_;
};

/// Uniform over the non-identity elements (always 0 when the group is trivial).
std::size_t sample_group_element(const TransformGroup& group, RngStream& rng);

/// max over smooth random probe images supported in the inscribed disk of
/// |‖T_g x‖ − ‖x‖| / ‖x‖.
double unitarity_defect(const TransformGroup& group, std::size_t g, std::uint64_t seed = 0, int probes = 8);

/// T_g x on a tape.
Var transform(const TransformGroup& group, std::size_t g, Var x);

}  // namespace rei
