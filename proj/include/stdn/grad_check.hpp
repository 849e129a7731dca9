#pragma once

#include <functional>

#include "stdn/tensor.hpp"

namespace stdn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at worst_index
  double numeric = 0.0;
};

/// Compares autodiff against central differences for every coordinate of x.
///
/// `f` must rebuild its graph from the leaf it is given each call; x's values
/// are perturbed in place and restored. The relative error per coordinate is
/// |a - n| / max(|a|, |n|, 1e-8). x must require grad.
GradCheckResult grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                           Tensor<double> x, double eps = 1e-5);

}  // namespace stdn
