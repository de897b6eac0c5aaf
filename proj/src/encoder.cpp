#include "svddlab/encoder.hpp"

#include <cmath>

#include "svddlab/error.hpp"
#include "svddlab/random.hpp"

namespace svddlab {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "relu";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "leaky_relu") return Activation::leaky_relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

void EncoderSpec::validate() const {
  if (input_dim == 0) throw ConfigError("encoder input_dim must be positive");
  if (layer_widths.empty()) throw ConfigError("encoder needs at least one layer");
  for (std::size_t w : layer_widths) {
    if (w == 0) throw ConfigError("encoder layer widths must be positive");
  }
  if (noise_head_k && *noise_head_k == 0) throw ConfigError("noise head k must be positive");
}

std::vector<Tensor> EncoderParams::encoder_tensors() const {
  std::vector<Tensor> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(weights[l]);
    if (l < biases.size()) out.push_back(biases[l]);
  }
  return out;
}

std::vector<Tensor> EncoderParams::head_tensors() const {
  if (!has_head()) return {};
  return {head_weight, head_bias};
}

std::vector<Tensor> EncoderParams::decay_tensors() const {
  std::vector<Tensor> out = weights;
  if (has_head()) out.push_back(head_weight);
  return out;
}

std::vector<NamedTensor> EncoderParams::named() const {
  std::vector<NamedTensor> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back({"enc." + std::to_string(l) + ".weight", weights[l]});
    if (l < biases.size()) out.push_back({"enc." + std::to_string(l) + ".bias", biases[l]});
  }
  if (has_head()) {
    out.push_back({"head.weight", head_weight});
    out.push_back({"head.bias", head_bias});
  }
  return out;
}

namespace {

const Tensor& find_named(const std::vector<NamedTensor>& tensors, const std::string& name,
                         const Shape& expected) {
  for (const auto& nt : tensors) {
    if (nt.name != name) continue;
    if (nt.tensor.shape() != expected) {
      throw ShapeError("checkpoint tensor '" + name + "' has shape " + nt.tensor.shape().str() +
                        ", encoder spec expects " + expected.str());
    }
    return nt.tensor;
  }
  throw ConfigError("checkpoint is missing tensor '" + name + "'");
}

}  // namespace

EncoderParams EncoderParams::from_named(const std::vector<NamedTensor>& tensors,
                                        const EncoderSpec& spec) {
  spec.validate();
  EncoderParams p;
  std::size_t fan_in = spec.input_dim;
  for (std::size_t l = 0; l < spec.layer_widths.size(); ++l) {
    const std::size_t fan_out = spec.layer_widths[l];
    const std::string prefix = "enc." + std::to_string(l);
    p.weights.push_back(find_named(tensors, prefix + ".weight", {fan_in, fan_out}).detach(true));
    if (spec.use_bias) {
      p.biases.push_back(find_named(tensors, prefix + ".bias", {1, fan_out}).detach(true));
    }
    fan_in = fan_out;
  }
  if (spec.noise_head_k) {
    const std::size_t k = *spec.noise_head_k;
    p.head_weight = find_named(tensors, "head.weight", {fan_in, k}).detach(true);
    p.head_bias = find_named(tensors, "head.bias", {1, k}).detach(true);
  }
  return p;
}

EncoderParams EncoderParams::clone(bool requires_grad) const {
  EncoderParams p;
  for (const auto& w : weights) p.weights.push_back(w.detach(requires_grad));
  for (const auto& b : biases) p.biases.push_back(b.detach(requires_grad));
  if (has_head()) {
    p.head_weight = head_weight.detach(requires_grad);
    p.head_bias = head_bias.detach(requires_grad);
  }
  return p;
}

EncoderParams init_params(const EncoderSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  EncoderParams p;
  std::size_t fan_in = spec.input_dim;
  for (std::size_t width : spec.layer_widths) {
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in + width));
    std::vector<double> w(fan_in * width);
    for (double& v : w) v = rng.uniform(-s, s);
    p.weights.push_back(Tensor::from({fan_in, width}, std::move(w), true));
    if (spec.use_bias) p.biases.push_back(Tensor::zeros({1, width}, true));
    fan_in = width;
  }
  if (spec.noise_head_k) {
    p.head_weight = Tensor::zeros({fan_in, *spec.noise_head_k}, true);
    p.head_bias = Tensor::zeros({1, *spec.noise_head_k}, true);
  }
  return p;
}

Tensor encode(const EncoderParams& params, const EncoderSpec& spec, const Tensor& x) {
  if (x.cols() != spec.input_dim) {
    throw ShapeError("encode: input has " + std::to_string(x.cols()) + " columns, encoder expects " +
                     std::to_string(spec.input_dim));
  }
  if (params.weights.size() != spec.layer_widths.size()) {
    throw ShapeError("encode: params have " + std::to_string(params.weights.size()) +
                     " layers, spec has " + std::to_string(spec.layer_widths.size()));
  }
  Tensor h = x;
  const std::size_t layers = params.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    h = matmul(h, params.weights[l]);
    if (spec.use_bias) h = add(h, params.biases.at(l));
    if (l + 1 == layers) break;
    switch (spec.activation) {
      case Activation::relu: h = relu(h); break;
      case Activation::leaky_relu: h = leaky_relu(h, kLeakySlope); break;
      case Activation::tanh: h = tanh(h); break;
      case Activation::sigmoid: h = sigmoid(h); break;
    }
  }
  return h;
}

Tensor head_logits(const EncoderParams& params, const Tensor& features) {
  if (!params.has_head()) throw ConfigError("head_logits: encoder has no noise head");
  return add(matmul(features, params.head_weight), params.head_bias);
}

}  // namespace svddlab
