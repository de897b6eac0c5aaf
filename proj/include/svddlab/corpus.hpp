#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svddlab/objective.hpp"
#include "svddlab/random.hpp"

namespace svddlab {

struct ImageDims {
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;

  std::size_t size() const { return channels * height * width; }
  bool operator==(const ImageDims&) const = default;
};

enum class CorruptionKind { block_perm, strokes };

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::block_perm;
  std::size_t grid = 2;       // N: block grid side (block_perm)
  std::size_t thickness = 1;  // M: stroke thickness in pixels (strokes)
  std::size_t count_lo = 1;
  std::size_t count_hi = 3;
  double len_lo = 0.2;        // stroke length range, fractions of the image diagonal
  double len_hi = 0.5;

  void validate(const ImageDims& dims) const;
  /// Provenance text, e.g. "block_perm N=8" or "strokes M=1 count=1..3 len=0.2..0.5".
  std::string describe() const;

  /// Named presets: bp2, bp8, st_small, st_large.
  static CorruptionSpec preset(std::string_view name);
};

/// Images stored as count x C x H x W floats in [0, 1].
struct ImageCorpus {
  ImageDims dims;
  std::vector<float> pixels;
  std::vector<std::int32_t> class_labels;
  std::vector<std::uint8_t> anomaly_flags;  // 0 normal, 1 anomalous
  std::vector<std::string> provenance;      // empty for natural images

  std::size_t count() const { return class_labels.size(); }
  std::span<const float> image(std::size_t i) const;
  void push_back(std::span<const float> image, std::int32_t label, bool anomalous,
                 std::string provenance_text);
  void validate() const;
};

/// Class-conditioned texture images: per-class hue, oriented sinusoidal
/// grating and Gaussian blob count, with per-image jitter.
ImageCorpus generate_naturals(std::size_t n_per_class, std::size_t n_classes, const ImageDims& dims,
                              std::uint64_t seed);

/// Reorders the N x N blocks by a uniformly drawn non-identity permutation.
std::vector<float> block_permute(std::span<const float> image, const ImageDims& dims, std::size_t grid,
                                 Rng& rng);

/// Block at grid position dst receives the block from source[dst].
std::vector<float> block_permute_with(std::span<const float> image, const ImageDims& dims,
                                      std::size_t grid, std::span<const std::size_t> source);

/// Overdraws random single-colour polylines of the given thickness.
std::vector<float> draw_strokes(std::span<const float> image, const ImageDims& dims,
                                const CorruptionSpec& spec, Rng& rng);

std::vector<float> corrupt(std::span<const float> image, const ImageDims& dims,
                           const CorruptionSpec& spec, Rng& rng);

enum class SplitSetup { one_vs_all, alteration };

std::string_view to_string(SplitSetup s);
SplitSetup parse_setup(std::string_view name);

struct SplitSpec {
  SplitSetup setup = SplitSetup::alteration;
  std::int32_t normal_class = 0;         // one_vs_all
  std::int32_t labeled_anomaly_class = 1;  // one_vs_all, semi-supervised
  double train_fraction = 0.6;
  double val_fraction = 0.2;
  bool semi_supervised = false;
  double labeled_anomaly_fraction = 0.10;

  void validate() const;
};

struct Splits {
  std::vector<std::size_t> train, val, test;
  std::vector<RowLabel> train_labels;  // parallel to train
  std::vector<std::uint8_t> val_truth, test_truth;  // 1 = anomalous
};

struct SplitCorpus {
  ImageCorpus corpus;  // naturals plus any generated anomalous counterparts
  Splits splits;
};

/// Builds train/val/test index sets. For the alteration setup every natural
/// image receives one corrupted counterpart (appended to the returned corpus).
SplitCorpus build_splits(const ImageCorpus& naturals, const SplitSpec& spec,
                         const CorruptionSpec& corruption, std::uint64_t seed);

/// Rows of the corpus selected by indices, converted to an n x d matrix.
Tensor images_as_matrix(const ImageCorpus& corpus, std::span<const std::size_t> indices);

}  // namespace svddlab
