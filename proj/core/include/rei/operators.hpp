// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>

#include "rei/tape.hpp"
#include "rei/tensor.hpp"

namespace rei {

/// Measurement model A with a fixed backprojection A†.
///
/// Measurements may be stored on a padded grid (unsampled k-space, dropped
/// pixels); `measurement_support()` marks the entries that are actually
/// measured and `measurement_count()` is their number m. Noise and probes
/// only ever touch the support.
class ForwardOperator {
 public:
  virtual ~ForwardOperator() = default;

  virtual std::string name() const = 0;
  virtual Tensor::Shape image_shape() const = 0;
  virtual Tensor::Shape measurement_shape() const = 0;
  virtual const Tensor& measurement_support() const = 0;
  virtual std::size_t measurement_count() const = 0;
  virtual bool is_linear() const = 0;

  virtual Tensor apply(const Tensor& x) const = 0;
  virtual Tensor pinv(const Tensor& y) const = 0;
  /// J_A(x)ᵀ g
  virtual Tensor apply_vjp(const Tensor& x, const Tensor& g) const = 0;
  /// J_{A†}(y)ᵀ g
  virtual Tensor pinv_vjp(const Tensor& y, const Tensor& g) const = 0;
  /// Aᵀ y; throws for nonlinear operators.
  virtual Tensor adjoint(const Tensor& y) const;

  std::size_t image_size() const { return shape_size(image_shape()); }
};

/// Differentiable A(x) and A†(y) on a tape.
Var apply_op(const ForwardOperator& op, Var x);
Var pinv_op(const ForwardOperator& op, Var y);

/// A = I on an arbitrary shape.
class IdentityOp final : public ForwardOperator {
 public:
  explicit IdentityOp(Tensor::Shape shape);

  std::string name() const override { return "identity"; }
  Tensor::Shape image_shape() const override { return support_.shape(); }
  Tensor::Shape measurement_shape() const override { return support_.shape(); }
  const Tensor& measurement_support() const override { return support_; }
  std::size_t measurement_count() const override { return support_.size(); }
  bool is_linear() const override { return true; }
  Tensor apply(const Tensor& x) const override;
  Tensor pinv(const Tensor& y) const override;
  Tensor apply_vjp(const Tensor& x, const Tensor& g) const override;
  Tensor pinv_vjp(const Tensor& y, const Tensor& g) const override;

 private:
  Tensor support_;
};

/// A given by an explicit m×n matrix on flat vectors; A† is the Moore-Penrose
/// pseudo-inverse supplied by the caller.
class DenseOp final : public ForwardOperator {
 public:
  DenseOp(Tensor matrix, Tensor pseudo_inverse);

  std::string name() const override { return "dense"; }
  Tensor::Shape image_shape() const override { return {matrix_.dim(1)}; }
  Tensor::Shape measurement_shape() const override { return {matrix_.dim(0)}; }
  const Tensor& measurement_support() const override { return support_; }
  std::size_t measurement_count() const override { return support_.size(); }
  bool is_linear() const override { return true; }
  Tensor apply(const Tensor& x) const override;
  Tensor pinv(const Tensor& y) const override;
  Tensor apply_vjp(const Tensor& x, const Tensor& g) const override;
  Tensor pinv_vjp(const Tensor& y, const Tensor& g) const override;

 private:
  Tensor matrix_;
  Tensor pinv_;
  Tensor support_;
};

/// Pixel-mask inpainting: y = a ⊙ x with A† = A.
///
/// The mask shape must equal the trailing extents of the image shape, so a
/// [H,W] mask acts on each channel of a [C,H,W] image.
class InpaintOp final : public ForwardOperator {
 public:
  InpaintOp(Tensor mask, Tensor::Shape image_shape);
  explicit InpaintOp(Tensor mask);

  /// Mask keeping round(kept_fraction·H·W) pixels chosen uniformly at random.
  static InpaintOp random(std::size_t channels, std::size_t h, std::size_t w, double kept_fraction,
                          std::uint64_t seed);

  const Tensor& mask() const { return mask_; }
  double kept_fraction() const;

  std::string name() const override { return "inpaint"; }
  Tensor::Shape image_shape() const override { return image_shape_; }
  Tensor::Shape measurement_shape() const override { return image_shape_; }
  const Tensor& measurement_support() const override { return support_; }
  std::size_t measurement_count() const override { return count_; }
  bool is_linear() const override { return true; }
  Tensor apply(const Tensor& x) const override;
  Tensor pinv(const Tensor& y) const override;
  Tensor apply_vjp(const Tensor& x, const Tensor& g) const override;
  Tensor pinv_vjp(const Tensor& y, const Tensor& g) const override;

 private:
  Tensor mask_;
  Tensor::Shape image_shape_;
  Tensor support_;
  std::size_t count_ = 0;
};

/// Single-coil Cartesian MRI: A = S_ω ∘ F on 2-channel (real, imaginary) images,
/// A† = Fᴴ ∘ S_ω, with the unitary 2-D DFT.
class MriOp final : public ForwardOperator {
 public:
  /// `mask` is a binary [H,W] k-space sampling pattern (DC at index 0).
  explicit MriOp(Tensor mask, double acceleration = 1.0, double center_fraction = 0.0);

  /// Row subsampling: ⌈center_fraction·H⌉ rows around DC always sampled, the
  /// rest drawn without replacement until ⌈H/acceleration⌉ rows are sampled.
  static MriOp cartesian(std::size_t h, std::size_t w, double acceleration, double center_fraction,
                         std::uint64_t seed);

  const Tensor& mask() const { return mask_; }
  double acceleration() const { return acceleration_; }
  double center_fraction() const { return center_fraction_; }
  std::size_t sampled_rows() const;

  std::string name() const override { return "mri"; }
  Tensor::Shape image_shape() const override { return {2, mask_.dim(0), mask_.dim(1)}; }
  Tensor::Shape measurement_shape() const override { return image_shape(); }
  const Tensor& measurement_support() const override { return support_; }
  std::size_t measurement_count() const override { return count_; }
  bool is_linear() const override { return true; }
  Tensor apply(const Tensor& x) const override;
  Tensor pinv(const Tensor& y) const override;
  Tensor apply_vjp(const Tensor& x, const Tensor& g) const override;
  Tensor pinv_vjp(const Tensor& y, const Tensor& g) const override;

 private:
  Tensor mask_;
  double acceleration_;
  double center_fraction_;
  Tensor support_;
  std::size_t count_ = 0;
};

/// Parallel-beam geometry: `views` angles v·π/views, a square `side`×`side`
/// image and `side` detector bins. `pixel_size` is the physical pixel length
/// that converts pixel sums into line integrals.
struct RadonSpec {
  std::size_t views = 50;
  std::size_t side = 64;
  double pixel_size = 1.0;

  double angle(std::size_t view) const;
};

/// Rotate-and-sum projection with bilinear interpolation: [H,H] (or [1,H,H]) -> [views,H].
Tensor radon(const RadonSpec& spec, const Tensor& x);
/// Exact transpose of radon: [views,H] -> [H,H].
Tensor radon_adjoint(const RadonSpec& spec, const Tensor& sino);
/// Per-view ramp filter, zero-padded to the next power of two >= 2H. The response is
/// the DFT of the band-limited ramp kernel (0.25 at 0, -1/(πk)² at odd k).
Tensor ramp_filter(const RadonSpec& spec, const Tensor& sino);
/// Filtered backprojection scaled by π/(2·views): [views,H] -> [H,H], zero outside
/// the inscribed disk.
Tensor iradon_fbp(const RadonSpec& spec, const Tensor& sino);
/// Transpose of iradon_fbp: [H,H] -> [views,H].
Tensor iradon_fbp_adjoint(const RadonSpec& spec, const Tensor& image);

/// Nonlinear sparse-view CT: A(x) = I0·exp(-radon(x)), A†(y) = fbp(log(I0/max(y,1))).
class CtOp final : public ForwardOperator {
 public:
  CtOp(RadonSpec spec, double i0);

  const RadonSpec& radon_spec() const { return spec_; }
  double i0() const { return i0_; }

  /// fbp(log(I0/y)); throws DomainError when any y <= 0.
  Tensor backproject(const Tensor& y) const;

  std::string name() const override { return "ct"; }
  Tensor::Shape image_shape() const override { return {1, spec_.side, spec_.side}; }
  Tensor::Shape measurement_shape() const override { return {spec_.views, spec_.side}; }
  const Tensor& measurement_support() const override { return support_; }
  std::size_t measurement_count() const override { return support_.size(); }
  bool is_linear() const override { return false; }
  Tensor apply(const Tensor& x) const override;
  /// Clamps counts to at least 1 before backprojecting.
  Tensor pinv(const Tensor& y) const override;
  Tensor apply_vjp(const Tensor& x, const Tensor& g) const override;
  Tensor pinv_vjp(const Tensor& y, const Tensor& g) const override;

 private:
  RadonSpec spec_;
  double i0_;
  Tensor support_;
};

/// Residuals of the adjoint identity and A A† A = A on random probes.
struct SelfCheckReport {
  std::string op;
  bool adjoint_checked = false;
  std::string adjoint_status;
  /// max |<Ax,y> - <x,Aᵀy>| / (||Ax|| ||y||)
  double adjoint_residual = 0.0;
  /// max ||A A† A x - A x||_∞ / ||A x||_∞
  double pinv_residual = 0.0;
};

SelfCheckReport op_selfcheck(const ForwardOperator& op, std::uint64_t seed = 0, int probes = 3);

}  // namespace rei
