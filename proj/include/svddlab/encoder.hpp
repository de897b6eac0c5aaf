#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "svddlab/tensor.hpp"

namespace svddlab {

enum class Activation { relu, leaky_relu, tanh, sigmoid };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

inline constexpr double kLeakySlope = 0.01;

/// Fully connected encoder R^d -> R^p. Hidden layers apply the activation;
/// the last (feature) layer is affine only.
struct EncoderSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> layer_widths;  // last entry is the feature dim p
  bool use_bias = true;
  Activation activation = Activation::relu;
  std::optional<std::size_t> noise_head_k;  // linear head p -> k, always with bias

  std::size_t feature_dim() const { return layer_widths.empty() ? 0 : layer_widths.back(); }
  void validate() const;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Weights are stored fan_in x fan_out so a layer computes x * W + b.
struct EncoderParams {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;  // empty when use_bias is false
  Tensor head_weight;          // undefined when there is no noise head
  Tensor head_bias;

  bool has_head() const { return head_weight.defined(); }
  /// Encoder tensors (head excluded), weights before biases per layer.
  std::vector<Tensor> encoder_tensors() const;
  std::vector<Tensor> head_tensors() const;
  /// Weight matrices subject to weight decay (encoder layers and head).
  std::vector<Tensor> decay_tensors() const;

  std::vector<NamedTensor> named() const;
  /// Rebuilds params from named tensors, validating every shape against spec.
  static EncoderParams from_named(const std::vector<NamedTensor>& tensors, const EncoderSpec& spec);
  /// Deep copy; the copy's leaves are independent of this one.
  EncoderParams clone(bool requires_grad = true) const;
};

/// Weights ~ U[-s, s] with s = sqrt(6 / (fan_in + fan_out)); biases zero.
/// The noise head starts at zero so its initial logits are exactly 0.
EncoderParams init_params(const EncoderSpec& spec, std::uint64_t seed);

/// Features for a batch x (n x d) -> n x p.
Tensor encode(const EncoderParams& params, const EncoderSpec& spec, const Tensor& x);

/// Noise-head logits for features (n x p) -> n x k. Throws ConfigError when
/// the head is absent.
Tensor head_logits(const EncoderParams& params, const Tensor& features);

}  // namespace svddlab
