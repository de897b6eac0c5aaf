#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "svddlab/encoder.hpp"
#include "svddlab/tensor.hpp"

namespace svddlab {

enum class SvddMode { soft_boundary, one_class, semi_supervised };

std::string_view to_string(SvddMode m);
SvddMode parse_mode(std::string_view name);

/// Per-row supervision: unlabeled, labeled normal (+1) or labeled anomaly (-1).
enum class RowLabel : std::int8_t { unlabeled = 0, normal = 1, anomaly = -1 };

struct SvddState {
  std::vector<double> center;
  double radius = 0.0;  // soft-boundary only
  SvddMode mode = SvddMode::one_class;
  double nu = 0.1;
  double eta = 1.0;
  double eps_inv = 1e-6;

  void validate() const;
};

/// Column mean of the features; coordinates with |c_q| < floor are pushed to
/// floor * sign(c_q), with sign(0) = +1.
std::vector<double> init_center(const Tensor& features_all, double floor = 0.1);

/// ||phi_i - c||^2 per row, n x 1, differentiable w.r.t. features.
Tensor squared_distances(const Tensor& features, std::span<const double> center);

/// Lower empirical (1 - nu) quantile of Euclidean distances:
/// sorted[ceil((1 - nu) * n) - 1] with the 1-based index clamped to >= 1.
double update_radius(std::span<const double> distances, double nu);

/// (lambda / 2) * sum of squared Frobenius norms of the decayed weights.
Tensor weight_decay_term(const EncoderParams& params, double lambda);

/// Mode-dependent deep SVDD loss. labels may be empty (all unlabeled).
/// The radius in state is treated as a constant.
Tensor svdd_loss(const Tensor& features, const SvddState& state, std::span<const RowLabel> labels,
                 const Tensor& weight_decay);

/// d^2 for one-class/semi-supervised, d^2 - R^2 for soft-boundary.
std::vector<double> anomaly_score(const Tensor& features, const SvddState& state);

}  // namespace svddlab
