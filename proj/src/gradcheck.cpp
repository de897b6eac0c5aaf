#include "svddlab/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "svddlab/error.hpp"

namespace svddlab {

namespace {

double eval_at(const ScalarFn& f, const Shape& shape, std::vector<double> values, std::size_t coord) {
  const Tensor y = f(Tensor::from(shape, std::move(values)));
  if (!y.shape().is_scalar()) throw ShapeError("grad_check: f must return a scalar, got " + y.shape().str());
  const double v = y.item();
  if (!std::isfinite(v)) {
    throw NumericError("grad_check: non-finite function value when perturbing coordinate " +
                       std::to_string(coord));
  }
  return v;
}

}  // namespace

double grad_check(const ScalarFn& f, const Tensor& x, double eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) throw ConfigError("grad_check: eps must lie in (0, 1e-2]");

  const Tensor probe = x.detach(true);
  const Tensor y = f(probe);
  if (!y.shape().is_scalar()) throw ShapeError("grad_check: f must return a scalar, got " + y.shape().str());
  if (y.requires_grad()) backward(y);
  const std::vector<double> analytic(probe.grad().begin(), probe.grad().end());

  const std::vector<double> base(x.values().begin(), x.values().end());
  double worst = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (!std::isfinite(analytic[i])) {
      throw NumericError("grad_check: non-finite analytic gradient at coordinate " + std::to_string(i));
    }
    std::vector<double> plus = base, minus = base;
    plus[i] += eps;
    minus[i] -= eps;
    const double fd = (eval_at(f, x.shape(), std::move(plus), i) -
                       eval_at(f, x.shape(), std::move(minus), i)) / (2.0 * eps);
    const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(fd)});
    worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
  }
  return worst;
}

}  // namespace svddlab
