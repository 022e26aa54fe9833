// SPDX-License-Identifier: Apache-2.0
#include "rei/gradcheck.hpp"

#include <numeric>
#include <vector>

#include "rei/errors.hpp"

namespace rei {

Tensor finite_diff_grad(const ScalarFn& f, const Tensor& x, double step) {
  std::vector<std::size_t> coords(x.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  return finite_diff_grad(f, x, step, coords).reshaped(x.shape());
}

Tensor finite_diff_grad(const ScalarFn& f, const Tensor& x, double step, std::span<const std::size_t> coords) {
  if (!(step > 0.0)) throw DomainError("finite difference step must be positive");
  if (coords.empty()) throw ShapeError("finite_diff_grad: no coordinates requested");
  Tensor grad({coords.size()});
  Tensor probe = x;
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const std::size_t j = coords[k];
    if (j >= x.size()) throw ShapeError("finite_diff_grad: coordinate out of range");
    const double orig = probe[j];
    probe[j] = orig + step;
    const double fp = f(probe);
    probe[j] = orig - step;
    const double fm = f(probe);
    probe[j] = orig;
    grad[k] = (fp - fm) / (2.0 * step);
  }
  return grad;
}

}  // namespace rei
