#pragma once

#include <functional>
#include <span>

#include "mtaw/numerics/tensor.hpp"

namespace mtaw::num {

/// Central-difference estimate of d f / d x, one element at a time:
/// (f(x + h e_i) - f(x - h e_i)) / 2h. `f` must be deterministic.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor keeps entries
/// that are both near zero from dominating through round-off.
double max_relative_error(std::span<const double> a, std::span<const double> b,
                          double floor = 1e-8);

}  // namespace mtaw::num
