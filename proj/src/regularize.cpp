#include "svddlab/regularize.hpp"

#include <algorithm>
#include <cmath>

#include "svddlab/error.hpp"

namespace svddlab {

std::string_view to_string(RegKind k) {
  switch (k) {
    case RegKind::none: return "none";
    case RegKind::noise: return "noise";
    case RegKind::variance: return "variance";
  }
  return "none";
}

std::string_view to_string(Weighting w) {
  return w == Weighting::adaptive ? "adaptive" : "fixed";
}

RegKind parse_reg_kind(std::string_view name) {
  if (name == "none") return RegKind::none;
  if (name == "noise") return RegKind::noise;
  if (name == "variance") return RegKind::variance;
  throw ConfigError("unknown regularizer '" + std::string(name) + "'");
}

Weighting parse_weighting(std::string_view name) {
  if (name == "adaptive") return Weighting::adaptive;
  if (name == "fixed") return Weighting::fixed;
  throw ConfigError("unknown weighting scheme '" + std::string(name) + "'");
}

void RegConfig::validate() const {
  if (kind == RegKind::noise && k == 0) throw ConfigError("noise regularizer needs k >= 1");
  if (!(d0 > 0.0)) throw ConfigError("d0 must be positive");
  if (r < 1) throw ConfigError("anneal period r must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
  if (!(c0 >= 0.0) || !std::isfinite(c0)) throw ConfigError("c0 must be finite and non-negative");
}

Tensor sample_random_labels(std::size_t n, std::size_t k, Rng& stream) {
  if (n == 0 || k == 0) throw ConfigError("sample_random_labels: n and k must be >= 1");
  std::vector<double> bits(n * k);
  for (double& b : bits) b = stream.bernoulli_half() ? 1.0 : 0.0;
  return Tensor::from({n, k}, std::move(bits));
}

Tensor noise_reg_loss(const Tensor& logits, const Tensor& labels) {
  return sigmoid_bce(logits, labels);
}

double variance_threshold(int epoch, double d0, int r) {
  if (epoch < 0) throw ConfigError("variance_threshold: epoch must be >= 0");
  if (r < 1) throw ConfigError("variance_threshold: r must be >= 1");
  return d0 / std::pow(10.0, static_cast<double>(epoch / r));
}

double batch_variance(const Tensor& features) {
  const std::size_t n = features.rows(), p = features.cols();
  if (n < 2) throw ConfigError("batch variance needs at least 2 rows, got " + std::to_string(n));
  const auto v = features.values();
  std::vector<double> mu(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t q = 0; q < p; ++q) mu[q] += v[i * p + q];
  }
  for (double& m : mu) m /= static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t q = 0; q < p; ++q) {
      const double d = v[i * p + q] - mu[q];
      acc += d * d;
    }
  }
  return acc / (static_cast<double>(p) * static_cast<double>(n - 1));
}

Tensor variance_reg_loss(const Tensor& features, double threshold) {
  const std::size_t n = features.rows(), p = features.cols();
  if (n < 2) {
    throw ConfigError("variance_reg_loss: batch too small (" + std::to_string(n) +
                      " rows, need >= 2)");
  }
  const Tensor centered = sub(features, mean(features, Axis::rows));
  const Tensor variance =
      div_scalar(sum(square(centered)), static_cast<double>(p) * static_cast<double>(n - 1));
  return max_with_scalar(sub(Tensor::scalar(threshold), variance), 0.0);
}

double adaptive_weight_update(double c_prev, double l_svdd, double l_reg, double alpha, double beta,
                              double eps_ratio, double c_max) {
  if (l_svdd < 0.0 || l_reg < 0.0) {
    throw ConfigError("adaptive_weight_update: losses must be non-negative");
  }
  if (!std::isfinite(l_svdd) || !std::isfinite(l_reg) || !std::isfinite(c_prev)) {
    throw NumericError("adaptive_weight_update: non-finite input");
  }
  const double c = alpha * c_prev + beta * (1.0 - alpha) * l_svdd / std::max(l_reg, eps_ratio);
  return std::min(c, c_max);
}

Tensor total_loss(const Tensor& l_svdd, const Tensor& l_reg, double c_t) {
  if (c_t == 0.0) return l_svdd;
  return add(l_svdd, mul_scalar(l_reg, c_t));
}

}  // namespace svddlab
