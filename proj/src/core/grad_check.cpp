#include "stdn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "stdn/error.hpp"

namespace stdn {

GradCheckResult grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                           Tensor<double> x, double eps) {
  if (!x.requires_grad()) throw ContractError("grad_check: x must require grad");
  x.zero_grad();
  backward(f(x));
  const std::vector<double> analytic(x.grad().begin(), x.grad().end());

  GradCheckResult result;
  auto values = x.mutable_data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + eps;
    const double up = f(x).item();
    values[i] = saved - eps;
    const double down = f(x).item();
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic[i];
    const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
    if (err > result.max_rel_error || i == 0) {
      result.max_rel_error = std::max(result.max_rel_error, err);
      result.worst_index = i;
      result.analytic = a;
      result.numeric = numeric;
    }
  }
  x.zero_grad();
  return result;
}

}  // namespace stdn
