#pragma once

#include <cstddef>
#include <string>

#include "svddlab/random.hpp"
#include "svddlab/tensor.hpp"

namespace svddlab {

enum class RegKind { none, noise, variance };

/// adaptive: c_t follows the moving-average recurrence; fixed: c_t = 1.
enum class Weighting { adaptive, fixed };

std::string_view to_string(RegKind k);
std::string_view to_string(Weighting w);
RegKind parse_reg_kind(std::string_view name);
Weighting parse_weighting(std::string_view name);

struct RegConfig {
  RegKind kind = RegKind::none;
  Weighting weighting = Weighting::adaptive;
  std::size_t k = 30;       // noise tasks
  double d0 = 0.1;          // initial variance threshold
  int r = 3;                // anneal period in epochs
  double alpha = 0.9;
  double beta = 0.5;
  double c0 = 0.0;
  double eps_ratio = 1e-8;  // floor on l_reg in the weight update
  double c_max = 1e6;       // cap on c_t

  void validate() const;
};

/// n x k matrix of independent fair bits, drawn from the caller's stream.
Tensor sample_random_labels(std::size_t n, std::size_t k, Rng& stream);

/// Sigmoid cross-entropy of the noise head against random labels, averaged
/// over all n * k entries.
Tensor noise_reg_loss(const Tensor& logits, const Tensor& labels);

/// d0 * 10^-floor(epoch / r).
double variance_threshold(int epoch, double d0, int r);

/// Sample variance of the batch features averaged over dimensions,
/// (1 / (p (n - 1))) * sum_q sum_i (phi_iq - mean_q)^2. Not differentiable.
double batch_variance(const Tensor& features);

/// max{0, threshold - batch variance}. Requires n >= 2.
Tensor variance_reg_loss(const Tensor& features, double threshold);

/// c_t = alpha * c_prev + beta * (1 - alpha) * l_svdd / max(l_reg, eps_ratio),
/// capped at c_max. Losses are detached values and must be non-negative.
double adaptive_weight_update(double c_prev, double l_svdd, double l_reg, double alpha, double beta,
                              double eps_ratio = 1e-8, double c_max = 1e6);

/// l_svdd + c_t * l_reg with c_t a constant.
Tensor total_loss(const Tensor& l_svdd, const Tensor& l_reg, double c_t);

}  // namespace svddlab
