#include "svddlab/objective.hpp"

#include <algorithm>
#include <cmath>

#include "svddlab/error.hpp"

namespace svddlab {

std::string_view to_string(SvddMode m) {
  switch (m) {
    case SvddMode::soft_boundary: return "soft_boundary";
    case SvddMode::one_class: return "one_class";
    case SvddMode::semi_supervised: return "semi_supervised";
  }
  return "one_class";
}

SvddMode parse_mode(std::string_view name) {
  if (name == "soft_boundary") return SvddMode::soft_boundary;
  if (name == "one_class") return SvddMode::one_class;
  if (name == "semi_supervised") return SvddMode::semi_supervised;
  throw ConfigError("unknown SVDD mode '" + std::string(name) + "'");
}

void SvddState::validate() const {
  for (double v : center) {
    if (!std::isfinite(v)) throw NumericError("SVDD center has a non-finite coordinate");
  }
  if (!(radius >= 0.0)) throw ConfigError("SVDD radius must be non-negative");
  if (!(nu > 0.0 && nu <= 1.0)) throw ConfigError("nu must lie in (0, 1]");
  if (!(eta > 0.0)) throw ConfigError("eta must be positive");
  if (!(eps_inv > 0.0)) throw ConfigError("eps_inv must be positive");
}

std::vector<double> init_center(const Tensor& features_all, double floor) {
  if (!(floor > 0.0)) throw ConfigError("init_center: floor must be positive");
  const std::size_t n = features_all.rows(), p = features_all.cols();
  const auto v = features_all.values();
  std::vector<double> c(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t q = 0; q < p; ++q) {
      const double x = v[i * p + q];
      if (!std::isfinite(x)) {
        throw NumericError("init_center: non-finite feature at row " + std::to_string(i));
      }
      c[q] += x;
    }
  }
  for (double& cq : c) {
    cq /= static_cast<double>(n);
    if (std::abs(cq) < floor) cq = cq < 0.0 ? -floor : floor;
  }
  return c;
}

Tensor squared_distances(const Tensor& features, std::span<const double> center) {
  if (center.size() != features.cols()) {
    throw ShapeError("squared_distances: center has " + std::to_string(center.size()) +
                     " coordinates, features are " + features.shape().str());
  }
  const Tensor c = Tensor::row(std::vector<double>(center.begin(), center.end()));
  return sum(square(sub(features, c)), Axis::cols);
}

double update_radius(std::span<const double> distances, double nu) {
  if (distances.empty()) throw ConfigError("update_radius: empty distance list");
  if (!(nu > 0.0 && nu <= 1.0)) throw ConfigError("update_radius: nu must lie in (0, 1]");
  std::vector<double> sorted(distances.begin(), distances.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  // Snap to the nearest integer first so that e.g. (1 - 0.15) * 100 lands on 85.
  const double pos = (1.0 - nu) * n;
  const double nearest = std::round(pos);
  auto index = static_cast<std::int64_t>(std::abs(pos - nearest) <= 1e-9 * std::max(1.0, n) ? nearest : std::ceil(pos));
  index = std::clamp<std::int64_t>(index, 1, static_cast<std::int64_t>(sorted.size()));
  return sorted[static_cast<std::size_t>(index - 1)];
}

Tensor weight_decay_term(const EncoderParams& params, double lambda) {
  Tensor total = Tensor::scalar(0.0);
  if (lambda == 0.0) return total;
  for (const Tensor& w : params.decay_tensors()) total = add(total, sum(square(w)));
  return mul_scalar(total, 0.5 * lambda);
}

Tensor svdd_loss(const Tensor& features, const SvddState& state, std::span<const RowLabel> labels,
                 const Tensor& weight_decay) {
  const std::size_t rows = features.rows();
  if (!labels.empty() && labels.size() != rows) {
    throw ShapeError("svdd_loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(rows) + " rows");
  }
  const bool any_labeled =
      std::any_of(labels.begin(), labels.end(), [](RowLabel l) { return l != RowLabel::unlabeled; });
  const Tensor d2 = squared_distances(features, state.center);

  switch (state.mode) {
    case SvddMode::one_class: {
      if (any_labeled) throw ConfigError("svdd_loss: one_class mode does not accept labeled rows");
      return add(mean(d2), weight_decay);
    }
    case SvddMode::soft_boundary: {
      if (any_labeled) throw ConfigError("svdd_loss: soft_boundary mode does not accept labeled rows");
      const double r2 = state.radius * state.radius;
      const Tensor excess = max_with_scalar(sub(d2, Tensor::scalar(r2)), 0.0);
      const Tensor penalty = mul_scalar(sum(excess), 1.0 / (state.nu * static_cast<double>(rows)));
      return add(add(penalty, Tensor::scalar(r2)), weight_decay);
    }
    case SvddMode::semi_supervised: {
      std::vector<std::size_t> unlabeled, normals, anomalies;
      for (std::size_t i = 0; i < rows; ++i) {
        const RowLabel l = labels.empty() ? RowLabel::unlabeled : labels[i];
        if (l == RowLabel::unlabeled) unlabeled.push_back(i);
        else if (l == RowLabel::normal) normals.push_back(i);
        else anomalies.push_back(i);
      }
      Tensor unl = Tensor::scalar(0.0);
      if (!unlabeled.empty()) unl = sum(gather_rows(d2, unlabeled));
      Tensor lab = Tensor::scalar(0.0);
      if (!normals.empty()) lab = add(lab, sum(gather_rows(d2, normals)));
      if (!anomalies.empty()) {
        const Tensor shifted = add(gather_rows(d2, anomalies), Tensor::scalar(state.eps_inv));
        lab = add(lab, sum(reciprocal(shifted)));
      }
      const double total = static_cast<double>(rows);
      return add(div_scalar(add(unl, mul_scalar(lab, state.eta)), total), weight_decay);
    }
  }
  throw ConfigError("svdd_loss: unknown mode");
}

std::vector<double> anomaly_score(const Tensor& features, const SvddState& state) {
  const Tensor d2 = squared_distances(features.detach(), state.center);
  std::vector<double> scores(d2.values().begin(), d2.values().end());
  if (state.mode == SvddMode::soft_boundary) {
    const double r2 = state.radius * state.radius;
    for (double& s : scores) s -= r2;
  }
  return scores;
}

}  // namespace svddlab
