// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "rei/tensor.hpp"

namespace rei {

using ScalarFn = std::function<double(const Tensor&)>;

/// Central differences (f(x + h e_j) - f(x - h e_j)) / 2h for every coordinate.
Tensor finite_diff_grad(const ScalarFn& f, const Tensor& x, double step);

/// Central differences restricted to `coords`; result[k] is the partial for coords[k].
Tensor finite_diff_grad(const ScalarFn& f, const Tensor& x, double step, std::span<const std::size_t> coords);

}  // namespace rei
