#pragma once

#include <functional>

#include "svddlab/tensor.hpp"

namespace svddlab {

using ScalarFn = std::function<Tensor(const Tensor&)>;

/// Compares the reverse-mode gradient of f at x with central differences.
///
/// Returns max_i |g_ad - g_fd| / max(1, |g_ad|, |g_fd|). eps must lie in
/// (0, 1e-2]. Throws NumericError naming the coordinate when f produces a
/// non-finite value. x itself is not modified.
double grad_check(const ScalarFn& f, const Tensor& x, double eps = 1e-5);

}  // namespace svddlab
