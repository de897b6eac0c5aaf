#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "svddlab/corpus.hpp"
#include "svddlab/encoder.hpp"
#include "svddlab/metrics_log.hpp"
#include "svddlab/objective.hpp"
#include "svddlab/regularize.hpp"

namespace svddlab {

struct TrainConfig {
  SvddMode mode = SvddMode::one_class;
  double nu = 0.1;
  double eta = 1.0;
  double eps_inv = 1e-6;
  double center_floor = 0.1;
  RegConfig reg;
  double lr = 1e-4;
  std::optional<double> lr_head;  // defaults to 10 * lr
  double weight_decay = 5e-4;
  std::size_t batch_size = 50;
  int max_epochs = 30;
  std::uint64_t seed = 0;
  double collapse_tau = 1e-6;
  std::size_t probe_size = 64;

  double head_lr() const { return lr_head.value_or(10.0 * lr); }
  void validate() const;
};

/// Training, validation and probe matrices (rows are flattened images).
struct TrainData {
  Tensor train_x;
  std::vector<RowLabel> train_labels;
  Tensor val_x;
  std::vector<std::uint8_t> val_truth;
  Tensor probe_x;  // fixed held-out batch for the collapse metric

  /// Probe rows are the first probe_size normal images of the val split.
  static TrainData from_splits(const ImageCorpus& corpus, const Splits& splits, std::size_t probe_size);
};

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

/// Bias-corrected Adam update of a leaf tensor at step t >= 1. Throws
/// NumericError on a non-finite gradient.
void adam_step(Tensor& param, std::span<const double> grad, AdamMoments& moments, double lr, long t);

/// Mean per-dimension sample variance of features (n >= 2).
double collapse_metric(const Tensor& features);

/// Anomaly scores for x under the given parameters; runs without a graph.
std::vector<double> score_inputs(const EncoderParams& params, const EncoderSpec& spec,
                                 const SvddState& state, const Tensor& x);

struct TrainResult {
  EncoderSpec spec;  // effective spec (noise head present iff reg is noise)
  EncoderParams final_params;
  SvddState final_state;
  EncoderParams best_params;
  SvddState best_state;
  int best_epoch = -1;
  double best_val_auc = 0.0;
  std::vector<TrainLogRow> log;
  bool aborted = false;
  std::string abort_reason;
};

/// Full optimisation run. A non-finite loss stops training with
/// aborted = true; the log up to that point is kept.
TrainResult train(const EncoderSpec& spec, const TrainConfig& config, const TrainData& data);

// Model checkpoints: encoder tensors plus "svdd.center" (1 x p) and
// "svdd.radius" (1 x 1).
void save_model(const std::filesystem::path& path, const EncoderParams& params, const SvddState& state);

struct LoadedModel {
  EncoderParams params;
  SvddState state;
};

/// state supplies mode/nu/eta; center and radius come from the file.
LoadedModel load_model(const std::filesystem::path& path, const EncoderSpec& spec, SvddState state);

}  // namespace svddlab
