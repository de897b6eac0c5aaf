#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "svddlab/corpus.hpp"
#include "svddlab/encoder.hpp"
#include "svddlab/trainer.hpp"

namespace svddlab {

/// Everything a CLI run needs, filled from a flat `key = value` file.
struct RunConfig {
  // data
  ImageDims dims;
  std::size_t n_per_class = 500;
  std::size_t n_classes = 6;
  std::uint64_t data_seed = 1;
  std::string corruption_preset = "bp8";
  CorruptionSpec corruption = CorruptionSpec::preset("bp8");
  SplitSpec split;

  // model
  std::vector<std::size_t> layer_widths{32, 8};
  bool use_bias = true;
  Activation activation = Activation::leaky_relu;

  // objective, regularizer and optimisation
  TrainConfig train;

  EncoderSpec encoder_spec() const;
  void validate() const;
};

RunConfig parse_config(std::istream& in, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Applies a single key as if it appeared last in the file.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Every key with its effective value, one `key = value` per line, in schema
/// order. Parsing the text back yields an identical configuration.
std::string resolved_config(const RunConfig& config);

/// Key reference with defaults, for --help.
std::string config_help();

}  // namespace svddlab
