#include "svddlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "svddlab/checkpoint.hpp"
#include "svddlab/error.hpp"
#include "svddlab/evalreport.hpp"

namespace svddlab {

void TrainConfig::validate() const {
  SvddState probe;
  probe.mode = mode;
  probe.nu = nu;
  probe.eta = eta;
  probe.eps_inv = eps_inv;
  probe.validate();
  reg.validate();
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(head_lr() > 0.0)) throw ConfigError("lr_head must be positive");
  if (!(weight_decay > 0.0)) throw ConfigError("weight_decay must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (reg.kind == RegKind::variance && batch_size < 2) {
    throw ConfigError("variance regularizer needs batch_size >= 2");
  }
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (!(collapse_tau > 0.0)) throw ConfigError("collapse_tau must be positive");
  if (probe_size < 2) throw ConfigError("probe_size must be >= 2");
  if (!(center_floor > 0.0)) throw ConfigError("center_floor must be positive");
}

TrainData TrainData::from_splits(const ImageCorpus& corpus, const Splits& splits, std::size_t probe_size) {
  if (splits.train.empty() || splits.val.empty()) throw ConfigError("train and val splits must be non-empty");
  TrainData d;
  d.train_x = images_as_matrix(corpus, splits.train);
  d.train_labels = splits.train_labels;
  d.val_x = images_as_matrix(corpus, splits.val);
  d.val_truth = splits.val_truth;
  std::vector<std::size_t> probe;
  for (std::size_t i = 0; i < splits.val.size() && probe.size() < probe_size; ++i) {
    if (splits.val_truth[i] == 0) probe.push_back(splits.val[i]);
  }
  if (probe.size() < 2) throw ConfigError("val split has fewer than 2 normal images for the probe batch");
  d.probe_x = images_as_matrix(corpus, probe);
  return d;
}

void adam_step(Tensor& param, std::span<const double> grad, AdamMoments& moments, double lr, long t) {
  if (t < 1) throw ConfigError("adam_step: t must be >= 1");
  const std::size_t n = param.size();
  if (grad.size() != n) throw ShapeError("adam_step: gradient size mismatch");
  if (moments.m.size() != n) {
    moments.m.assign(n, 0.0);
    moments.v.assign(n, 0.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grad[i])) {
      throw NumericError("adam_step: non-finite gradient at coordinate " + std::to_string(i));
    }
  }
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t));
  std::vector<double> values(param.values().begin(), param.values().end());
  for (std::size_t i = 0; i < n; ++i) {
    moments.m[i] = kAdamBeta1 * moments.m[i] + (1.0 - kAdamBeta1) * grad[i];
    moments.v[i] = kAdamBeta2 * moments.v[i] + (1.0 - kAdamBeta2) * grad[i] * grad[i];
    const double m_hat = moments.m[i] / c1;
    const double v_hat = moments.v[i] / c2;
    values[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
  }
  param.assign(values);
}

double collapse_metric(const Tensor& features) {
  if (features.rows() < 2) throw ConfigError("collapse_metric needs at least 2 rows");
  return batch_variance(features);
}

std::vector<double> score_inputs(const EncoderParams& params, const EncoderSpec& spec,
                                 const SvddState& state, const Tensor& x) {
  const EncoderParams frozen = params.clone(false);
  return anomaly_score(encode(frozen, spec, x), state);
}

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

TrainResult train(const EncoderSpec& base_spec, const TrainConfig& config, const TrainData& data) {
  config.validate();
  const std::size_t n = data.train_x.rows();
  if (n < 2) throw ConfigError("training needs at least 2 samples");
  if (data.train_labels.size() != n) throw ConfigError("train labels do not match train rows");
  const bool any_labeled = std::any_of(data.train_labels.begin(), data.train_labels.end(),
                                       [](RowLabel l) { return l != RowLabel::unlabeled; });
  if (any_labeled && config.mode != SvddMode::semi_supervised) {
    throw ConfigError("labeled training rows require semi_supervised mode");
  }

  TrainResult result;
  EncoderSpec spec = base_spec;
  spec.noise_head_k =
      config.reg.kind == RegKind::noise ? std::optional<std::size_t>(config.reg.k) : std::nullopt;
  spec.validate();
  if (spec.input_dim != data.train_x.cols()) {
    throw ConfigError("encoder input_dim " + std::to_string(spec.input_dim) + " does not match data dimension " +
                      std::to_string(data.train_x.cols()));
  }
  result.spec = spec;

  Rng init_rng = Rng::stream(config.seed, 1);
  Rng shuffle_rng = Rng::stream(config.seed, 2);
  Rng label_rng = Rng::stream(config.seed, 3);

  EncoderParams params = init_params(spec, init_rng.next_u64());

  SvddState state;
  state.mode = config.mode;
  state.nu = config.nu;
  state.eta = config.eta;
  state.eps_inv = config.eps_inv;
  {
    // Center from one forward pass over the training rows that are not
    // labeled anomalies.
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i) {
      if (data.train_labels[i] != RowLabel::anomaly) rows.push_back(i);
    }
    const Tensor feats = encode(params.clone(false), spec, gather_rows(data.train_x, rows));
    state.center = init_center(feats, config.center_floor);
  }

  const RegConfig& reg = config.reg;
  double c_t = 0.0;
  if (reg.kind != RegKind::none) c_t = reg.weighting == Weighting::fixed ? 1.0 : reg.c0;

  std::vector<Tensor> enc_tensors = params.encoder_tensors();
  std::vector<Tensor> head_tensors = params.head_tensors();
  std::vector<AdamMoments> enc_moments(enc_tensors.size()), head_moments(head_tensors.size());

  std::vector<std::size_t> order(n);
  std::optional<double> best_clean, best_any;
  int best_any_epoch = -1;
  EncoderParams best_any_params;
  SvddState best_any_state;
  long t = 0;

  auto abort_run = [&](const std::string& why) {
    result.aborted = true;
    result.abort_reason = why;
  };

  for (int epoch = 0; epoch < config.max_epochs && !result.aborted; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i)));
      std::swap(order[i], order[j]);
    }

    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, n - start);
      if (count < 2) break;  // last partial batch dropped
      const std::span<const std::size_t> batch(order.data() + start, count);
      std::vector<RowLabel> labels;
      for (std::size_t idx : batch) labels.push_back(data.train_labels[idx]);
      ++t;

      const Tensor x = gather_rows(data.train_x, batch);
      const Tensor features = encode(params, spec, x);
      TrainLogRow row;
      row.epoch = epoch;
      row.iter = t - 1;

      if (state.mode == SvddMode::soft_boundary) {
        const Tensor d2 = squared_distances(features.detach(), state.center);
        std::vector<double> dist(d2.values().begin(), d2.values().end());
        for (double& d : dist) d = std::sqrt(d);
        state.radius = update_radius(dist, state.nu);
        row.radius = state.radius;
      }

      const Tensor l_svdd = svdd_loss(features, state, labels, weight_decay_term(params, config.weight_decay));
      row.l_svdd = l_svdd.item();

      Tensor l_reg;
      if (reg.kind == RegKind::noise) {
        const Tensor targets = sample_random_labels(count, reg.k, label_rng);
        l_reg = noise_reg_loss(head_logits(params, features), targets);
      } else if (reg.kind == RegKind::variance) {
        const double threshold = variance_threshold(epoch, reg.d0, reg.r);
        row.threshold = threshold;
        l_reg = variance_reg_loss(features, threshold);
      }
      if (l_reg.defined()) {
        row.l_reg = l_reg.item();
        if (!std::isfinite(row.l_svdd) || !std::isfinite(*row.l_reg)) {
          row.c_t = c_t;
          result.log.push_back(row);
          abort_run("non-finite loss at iteration " + std::to_string(t - 1));
          break;
        }
        if (reg.weighting == Weighting::adaptive) {
          c_t = adaptive_weight_update(c_t, row.l_svdd, *row.l_reg, reg.alpha, reg.beta, reg.eps_ratio, reg.c_max);
        }
      }
      row.c_t = c_t;

      const Tensor total = l_reg.defined() ? total_loss(l_svdd, l_reg, c_t) : l_svdd;
      if (!std::isfinite(total.item())) {
        result.log.push_back(row);
        abort_run("non-finite loss at iteration " + std::to_string(t - 1));
        break;
      }
      for (Tensor& p : enc_tensors) p.zero_grad();
      for (Tensor& p : head_tensors) p.zero_grad();
      backward(total);
      try {
        for (std::size_t i = 0; i < enc_tensors.size(); ++i) {
          adam_step(enc_tensors[i], enc_tensors[i].grad(), enc_moments[i], config.lr, t);
        }
        for (std::size_t i = 0; i < head_tensors.size(); ++i) {
          adam_step(head_tensors[i], head_tensors[i].grad(), head_moments[i], config.head_lr(), t);
        }
      } catch (const NumericError& e) {
        result.log.push_back(row);
        abort_run(e.what());
        break;
      }
      result.log.push_back(row);
    }
    if (result.aborted || result.log.empty()) break;

    // Epoch end: collapse probe and validation AUC.
    const EncoderParams frozen = params.clone(false);
    const Tensor probe_features = encode(frozen, spec, data.probe_x);
    const double metric = collapse_metric(probe_features);
    const std::vector<double> scores = anomaly_score(encode(frozen, spec, data.val_x), state);
    if (!std::isfinite(metric) || !all_finite(scores)) {
      abort_run("non-finite features at end of epoch " + std::to_string(epoch));
      break;
    }
    const double auc = roc_auc(scores, data.val_truth);
    const bool collapsed = metric < config.collapse_tau;
    TrainLogRow& last = result.log.back();
    last.collapse_metric = metric;
    last.val_auc = auc;
    last.collapsed = collapsed;

    if (!collapsed && (!best_clean || auc > *best_clean)) {
      best_clean = auc;
      result.best_epoch = epoch;
      result.best_params = params.clone();
      result.best_state = state;
    }
    if (!best_any || auc > *best_any) {
      best_any = auc;
      best_any_epoch = epoch;
      best_any_params = params.clone();
      best_any_state = state;
    }
  }

  if (!best_clean && best_any) {
    // Every epoch collapsed: fall back to the best epoch overall.
    result.best_epoch = best_any_epoch;
    result.best_params = std::move(best_any_params);
    result.best_state = best_any_state;
    best_clean = best_any;
  }
  result.best_val_auc = best_clean.value_or(0.0);
  result.final_params = std::move(params);
  result.final_state = state;
  if (result.best_epoch < 0) {
    result.best_params = result.final_params.clone();
    result.best_state = state;
  }
  return result;
}

void save_model(const std::filesystem::path& path, const EncoderParams& params, const SvddState& state) {
  std::vector<NamedTensor> tensors = params.named();
  tensors.push_back({"svdd.center", Tensor::row(state.center)});
  tensors.push_back({"svdd.radius", Tensor::scalar(state.radius)});
  save_checkpoint(path, tensors);
}

LoadedModel load_model(const std::filesystem::path& path, const EncoderSpec& spec, SvddState state) {
  const auto tensors = load_checkpoint(path);
  LoadedModel model;
  model.params = EncoderParams::from_named(tensors, spec);
  bool have_center = false, have_radius = false;
  for (const auto& nt : tensors) {
    if (nt.name == "svdd.center") {
      if (nt.tensor.size() != spec.feature_dim()) {
        throw ConfigError("checkpoint center has " + std::to_string(nt.tensor.size()) +
                          " coordinates, encoder feature dim is " + std::to_string(spec.feature_dim()));
      }
      state.center.assign(nt.tensor.values().begin(), nt.tensor.values().end());
      have_center = true;
    } else if (nt.name == "svdd.radius") {
      state.radius = nt.tensor.item();
      have_radius = true;
    }
  }
  if (!have_center || !have_radius) throw ConfigError("checkpoint lacks the SVDD center/radius: " + path.string());
  state.validate();
  model.state = std::move(state);
  return model;
}

}  // namespace svddlab
