#include "svddlab/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "svddlab/error.hpp"

namespace svddlab {

// ---------------------------------------------------------------------------
// Specs

void CorruptionSpec::validate(const ImageDims& dims) const {
  if (kind == CorruptionKind::block_perm) {
    if (grid < 2) throw ConfigError("block permutation needs N >= 2");
    if (dims.height % grid != 0 || dims.width % grid != 0) {
      throw ConfigError("block permutation: image " + std::to_string(dims.height) + "x" +
                        std::to_string(dims.width) + " is not divisible by N=" + std::to_string(grid));
    }
  } else {
    if (thickness < 1) throw ConfigError("strokes need thickness M >= 1");
    if (count_lo < 1 || count_hi < count_lo) throw ConfigError("stroke count range is empty");
    if (!(len_lo > 0.0) || len_hi < len_lo) throw ConfigError("stroke length range is empty");
  }
}

std::string CorruptionSpec::describe() const {
  std::ostringstream out;
  if (kind == CorruptionKind::block_perm) {
    out << "block_perm N=" << grid;
  } else {
    out << "strokes M=" << thickness << " count=" << count_lo << ".." << count_hi
        << " len=" << len_lo << ".." << len_hi;
  }
  return out.str();
}

CorruptionSpec CorruptionSpec::preset(std::string_view name) {
  CorruptionSpec s;
  if (name == "bp2") {
    s.kind = CorruptionKind::block_perm;
    s.grid = 2;
  } else if (name == "bp8") {
    s.kind = CorruptionKind::block_perm;
    s.grid = 8;
  } else if (name == "st_small") {
    s.kind = CorruptionKind::strokes;
    s.thickness = 1;
  } else if (name == "st_large") {
    s.kind = CorruptionKind::strokes;
    s.thickness = 3;
  } else {
    throw ConfigError("unknown corruption preset '" + std::string(name) + "'");
  }
  return s;
}

std::string_view to_string(SplitSetup s) {
  return s == SplitSetup::alteration ? "alteration" : "one_vs_all";
}

SplitSetup parse_setup(std::string_view name) {
  if (name == "alteration") return SplitSetup::alteration;
  if (name == "one_vs_all") return SplitSetup::one_vs_all;
  throw ConfigError("unknown split setup '" + std::string(name) + "'");
}

void SplitSpec::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in (0, 1)");
  if (train_fraction + val_fraction >= 1.0) {
    throw ConfigError("train_fraction + val_fraction must leave room for a test split");
  }
  if (!(labeled_anomaly_fraction > 0.0 && labeled_anomaly_fraction < 1.0)) {
    throw ConfigError("labeled_anomaly_fraction must lie in (0, 1)");
  }
}

// ---------------------------------------------------------------------------
// Corpus container

std::span<const float> ImageCorpus::image(std::size_t i) const {
  const std::size_t n = dims.size();
  return std::span<const float>(pixels).subspan(i * n, n);
}

void ImageCorpus::push_back(std::span<const float> img, std::int32_t label, bool anomalous,
                            std::string provenance_text) {
  if (img.size() != dims.size()) throw ShapeError("image size does not match corpus dims");
  pixels.insert(pixels.end(), img.begin(), img.end());
  class_labels.push_back(label);
  anomaly_flags.push_back(anomalous ? 1 : 0);
  provenance.push_back(std::move(provenance_text));
}

void ImageCorpus::validate() const {
  if (count() == 0) throw ConfigError("corpus is empty");
  if (dims.channels != 1 && dims.channels != 3) throw ConfigError("corpus must have 1 or 3 channels");
  if (pixels.size() != count() * dims.size() || anomaly_flags.size() != count() ||
      provenance.size() != count()) {
    throw ConfigError("corpus arrays are inconsistent");
  }
  for (float v : pixels) {
    if (!(v >= 0.0f && v <= 1.0f)) throw ConfigError("corpus pixel outside [0, 1]");
  }
  for (std::size_t i = 0; i < count(); ++i) {
    if (anomaly_flags[i] && provenance[i].empty()) {
      throw ConfigError("anomalous image " + std::to_string(i) + " lacks provenance");
    }
  }
}

// ---------------------------------------------------------------------------
// Natural images

namespace {

struct Rgb {
  double r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double x = h * 6.0;
  const int sector = static_cast<int>(x) % 6;
  const double f = x - std::floor(x);
  const double p = v * (1.0 - s), q = v * (1.0 - s * f), t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

struct ClassStyle {
  Rgb base;
  double frequency;  // grating cycles across the image width
  double angle;      // grating orientation, radians
  std::size_t blobs;
  std::vector<std::pair<double, double>> blob_anchor;  // fractions of W, H
  std::vector<double> blob_sign;
};

ClassStyle class_style(std::size_t cls, std::size_t n_classes, std::size_t channels) {
  ClassStyle s;
  if (channels == 3) {
    s.base = hsv_to_rgb(static_cast<double>(cls) / static_cast<double>(n_classes), 0.65, 0.8);
  } else {
    const double level =
        0.25 + 0.5 * static_cast<double>(cls) / static_cast<double>(std::max<std::size_t>(n_classes - 1, 1));
    s.base = {level, level, level};
  }
  s.frequency = 1.5 + static_cast<double>(cls % 3);
  s.angle = std::numbers::pi * static_cast<double>(cls) / static_cast<double>(n_classes);
  s.blobs = 1 + cls % 3;
  Rng rng = Rng::stream(0x5eed5 + cls, n_classes);
  for (std::size_t b = 0; b < s.blobs; ++b) {
    s.blob_anchor.emplace_back(rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8));
    s.blob_sign.push_back(rng.bernoulli_half() ? 1.0 : -1.0);
  }
  return s;
}

}  // namespace

ImageCorpus generate_naturals(std::size_t n_per_class, std::size_t n_classes, const ImageDims& dims,
                              std::uint64_t seed) {
  if (dims.height < 8 || dims.width < 8) throw ConfigError("natural images need H, W >= 8");
  if (dims.channels != 1 && dims.channels != 3) throw ConfigError("natural images need C in {1, 3}");
  if (n_per_class == 0 || n_classes == 0) throw ConfigError("corpus needs at least one image per class");

  ImageCorpus corpus;
  corpus.dims = dims;
  corpus.pixels.reserve(n_per_class * n_classes * dims.size());
  const std::size_t H = dims.height, W = dims.width, C = dims.channels;
  std::vector<float> img(dims.size());
  std::vector<double> shade(H * W);

  for (std::size_t cls = 0; cls < n_classes; ++cls) {
    const ClassStyle style = class_style(cls, n_classes, C);
    for (std::size_t j = 0; j < n_per_class; ++j) {
      Rng rng = Rng::stream(seed, cls * n_per_class + j);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double freq = style.frequency * rng.uniform(0.9, 1.1);
      const double angle = style.angle + rng.uniform(-0.15, 0.15);
      const double contrast = rng.uniform(0.15, 0.25);
      const double brightness = rng.uniform(0.92, 1.08);
      const double kx = std::cos(angle) * 2.0 * std::numbers::pi * freq / static_cast<double>(W);
      const double ky = std::sin(angle) * 2.0 * std::numbers::pi * freq / static_cast<double>(W);

      for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
          shade[y * W + x] = 0.75 + contrast * std::sin(kx * static_cast<double>(x) +
                                                        ky * static_cast<double>(y) + phase);
        }
      }
      const double sigma = 0.12 * static_cast<double>(std::min(H, W));
      for (std::size_t b = 0; b < style.blobs; ++b) {
        const double cx = (style.blob_anchor[b].first + rng.uniform(-0.08, 0.08)) * static_cast<double>(W);
        const double cy = (style.blob_anchor[b].second + rng.uniform(-0.08, 0.08)) * static_cast<double>(H);
        const double amp = rng.uniform(0.15, 0.3) * style.blob_sign[b];
        for (std::size_t y = 0; y < H; ++y) {
          for (std::size_t x = 0; x < W; ++x) {
            const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
            shade[y * W + x] += amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
          }
        }
      }
      const double base[3] = {style.base.r, style.base.g, style.base.b};
      for (std::size_t c = 0; c < C; ++c) {
        const double tint = std::clamp(base[c] * brightness, 0.0, 1.0);
        for (std::size_t k = 0; k < H * W; ++k) {
          img[c * H * W + k] = static_cast<float>(std::clamp(tint * shade[k], 0.0, 1.0));
        }
      }
      corpus.push_back(img, static_cast<std::int32_t>(cls), false, "");
    }
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Corruptions

std::vector<float> block_permute_with(std::span<const float> image, const ImageDims& dims,
                                      std::size_t grid, std::span<const std::size_t> source) {
  CorruptionSpec spec;
  spec.kind = CorruptionKind::block_perm;
  spec.grid = grid;
  spec.validate(dims);
  if (image.size() != dims.size()) throw ShapeError("block_permute: image size does not match dims");
  if (source.size() != grid * grid) throw ConfigError("block_permute: permutation has wrong length");
  const std::size_t H = dims.height, W = dims.width;
  const std::size_t bh = H / grid, bw = W / grid;
  std::vector<float> out(image.size());
  for (std::size_t c = 0; c < dims.channels; ++c) {
    const std::size_t plane = c * H * W;
    for (std::size_t dst = 0; dst < grid * grid; ++dst) {
      const std::size_t src = source[dst];
      if (src >= grid * grid) throw ConfigError("block_permute: permutation entry out of range");
      const std::size_t dy = (dst / grid) * bh, dx = (dst % grid) * bw;
      const std::size_t sy = (src / grid) * bh, sx = (src % grid) * bw;
      for (std::size_t y = 0; y < bh; ++y) {
        for (std::size_t x = 0; x < bw; ++x) {
          out[plane + (dy + y) * W + dx + x] = image[plane + (sy + y) * W + sx + x];
        }
      }
    }
  }
  return out;
}

std::vector<float> block_permute(std::span<const float> image, const ImageDims& dims, std::size_t grid,
                                 Rng& rng) {
  if (grid < 2) throw ConfigError("block_permute: grid N must be >= 2");
  const std::size_t blocks = grid * grid;
  std::vector<std::size_t> perm(blocks);
  bool identity = true;
  while (identity) {
    for (std::size_t i = 0; i < blocks; ++i) perm[i] = i;
    for (std::size_t i = blocks - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)));
      std::swap(perm[i], perm[j]);
    }
    for (std::size_t i = 0; i < blocks; ++i) identity = identity && perm[i] == i;
  }
  return block_permute_with(image, dims, grid, perm);
}

namespace {

struct Point {
  double x, y;
};

void stamp(std::vector<float>& out, const ImageDims& dims, long px, long py, long half,
           std::span<const float> color) {
  const long H = static_cast<long>(dims.height), W = static_cast<long>(dims.width);
  const long y0 = std::max(0L, py - half), y1 = std::min(H - 1, py + half);
  const long x0 = std::max(0L, px - half), x1 = std::min(W - 1, px + half);
  for (long y = y0; y <= y1; ++y) {
    for (long x = x0; x <= x1; ++x) {
      for (std::size_t c = 0; c < dims.channels; ++c) {
        out[c * dims.height * dims.width + static_cast<std::size_t>(y * W + x)] = color[c];
      }
    }
  }
}

// Marks every pixel within Chebyshev distance `half` of the DDA rasterization
// of segment a-b.
void draw_segment(std::vector<float>& out, const ImageDims& dims, Point a, Point b, long half,
                  std::span<const float> color) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const auto steps = static_cast<long>(std::ceil(std::max(std::abs(dx), std::abs(dy))));
  for (long i = 0; i <= steps; ++i) {
    const double t = steps == 0 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps);
    stamp(out, dims, std::lround(a.x + t * dx), std::lround(a.y + t * dy), half, color);
  }
}

}  // namespace

std::vector<float> draw_strokes(std::span<const float> image, const ImageDims& dims,
                                const CorruptionSpec& spec, Rng& rng) {
  if (spec.kind != CorruptionKind::strokes) throw ConfigError("draw_strokes: spec kind must be strokes");
  spec.validate(dims);
  if (image.size() != dims.size()) throw ShapeError("draw_strokes: image size does not match dims");

  std::vector<float> out(image.begin(), image.end());
  std::vector<float> color(dims.channels);
  for (float& c : color) c = static_cast<float>(rng.uniform());

  const double maxx = static_cast<double>(dims.width - 1), maxy = static_cast<double>(dims.height - 1);
  const double diag = std::hypot(static_cast<double>(dims.width), static_cast<double>(dims.height));
  const long half = static_cast<long>(spec.thickness / 2);
  const auto count = rng.uniform_int(static_cast<std::int64_t>(spec.count_lo),
                                     static_cast<std::int64_t>(spec.count_hi));
  for (std::int64_t s = 0; s < count; ++s) {
    const auto waypoints = rng.uniform_int(2, 4);
    std::vector<Point> pts(static_cast<std::size_t>(waypoints));
    for (Point& p : pts) p = {rng.uniform(0.0, maxx), rng.uniform(0.0, maxy)};
    double budget = rng.uniform(spec.len_lo, spec.len_hi) * diag;
    for (std::size_t i = 0; i + 1 < pts.size() && budget > 0.0; ++i) {
      Point a = pts[i], b = pts[i + 1];
      const double len = std::hypot(b.x - a.x, b.y - a.y);
      if (len > budget) {
        const double t = budget / len;
        b = {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
      }
      budget -= std::min(len, budget);
      draw_segment(out, dims, a, b, half, color);
    }
  }
  return out;
}

std::vector<float> corrupt(std::span<const float> image, const ImageDims& dims,
                           const CorruptionSpec& spec, Rng& rng) {
  if (spec.kind == CorruptionKind::block_perm) return block_permute(image, dims, spec.grid, rng);
  return draw_strokes(image, dims, spec, rng);
}

// ---------------------------------------------------------------------------
// Splits

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  if (v.size() < 2) return;
  for (std::size_t i = v.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)));
    std::swap(v[i], v[j]);
  }
}

std::size_t round_count(double fraction, std::size_t total) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
}

// Number of labeled anomalies so that they make up `fraction` of the train set
// alongside `unlabeled` samples.
std::size_t labeled_count(double fraction, std::size_t unlabeled) {
  return static_cast<std::size_t>(
      std::llround(fraction / (1.0 - fraction) * static_cast<double>(unlabeled)));
}

void add_eval(Splits& s, bool to_val, std::size_t idx, bool anomalous) {
  (to_val ? s.val : s.test).push_back(idx);
  (to_val ? s.val_truth : s.test_truth).push_back(anomalous ? 1 : 0);
}

}  // namespace

SplitCorpus build_splits(const ImageCorpus& naturals, const SplitSpec& spec,
                         const CorruptionSpec& corruption, std::uint64_t seed) {
  spec.validate();
  naturals.validate();
  SplitCorpus result{naturals, {}};
  Splits& s = result.splits;
  Rng rng = Rng::stream(seed, 0x5011);

  if (spec.setup == SplitSetup::alteration) {
    corruption.validate(naturals.dims);
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < naturals.count(); ++i) {
      if (!naturals.anomaly_flags[i]) order.push_back(i);
    }
    const std::size_t n = order.size();
    const std::size_t n_train = round_count(spec.train_fraction, n);
    const std::size_t n_val = round_count(spec.val_fraction, n);
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
      throw ConfigError("alteration split infeasible for " + std::to_string(n) + " natural images");
    }
    shuffle(order, rng);

    // One corrupted counterpart per natural, seeded per source image.
    std::vector<std::size_t> counterpart(naturals.count(), 0);
    const std::string desc = corruption.describe();
    for (std::size_t src : order) {
      Rng img_rng = Rng::stream(seed ^ 0xA17E4ULL, src);
      const auto bad = corrupt(naturals.image(src), naturals.dims, corruption, img_rng);
      counterpart[src] = result.corpus.count();
      result.corpus.push_back(bad, naturals.class_labels[src], true,
                              desc + " source=" + std::to_string(src));
    }

    for (std::size_t i = 0; i < n_train; ++i) {
      s.train.push_back(order[i]);
      s.train_labels.push_back(RowLabel::unlabeled);
    }
    if (spec.semi_supervised) {
      const std::size_t m = labeled_count(spec.labeled_anomaly_fraction, n_train);
      if (m == 0 || m > n_train) throw ConfigError("semi-supervised split needs more training images");
      for (std::size_t i = 0; i < m; ++i) {
        s.train.push_back(counterpart[order[i]]);
        s.train_labels.push_back(RowLabel::anomaly);
      }
    }
    for (std::size_t i = n_train; i < n; ++i) {
      const bool to_val = i < n_train + n_val;
      add_eval(s, to_val, order[i], false);
      add_eval(s, to_val, counterpart[order[i]], true);
    }
    return result;
  }

  // one_vs_all
  std::vector<std::size_t> normals, labeled_pool, others;
  for (std::size_t i = 0; i < naturals.count(); ++i) {
    if (naturals.anomaly_flags[i]) continue;
    if (naturals.class_labels[i] == spec.normal_class) normals.push_back(i);
    else if (spec.semi_supervised && naturals.class_labels[i] == spec.labeled_anomaly_class)
      labeled_pool.push_back(i);
    else others.push_back(i);
  }
  if (spec.semi_supervised && spec.labeled_anomaly_class == spec.normal_class) {
    throw ConfigError("labeled anomaly class must differ from the normal class");
  }
  shuffle(normals, rng);
  shuffle(labeled_pool, rng);
  shuffle(others, rng);
  const std::size_t n_train = round_count(spec.train_fraction, normals.size());
  const double val_share = spec.val_fraction / (1.0 - spec.train_fraction);
  const std::size_t n_val = round_count(val_share, normals.size() - n_train);
  if (n_train == 0 || n_val == 0 || n_train + n_val >= normals.size() || others.empty()) {
    throw ConfigError("one_vs_all split infeasible for normal class " + std::to_string(spec.normal_class));
  }
  for (std::size_t i = 0; i < n_train; ++i) {
    s.train.push_back(normals[i]);
    s.train_labels.push_back(RowLabel::unlabeled);
  }
  std::size_t m = 0;
  if (spec.semi_supervised) {
    m = labeled_count(spec.labeled_anomaly_fraction, n_train);
    if (m == 0 || m >= labeled_pool.size()) {
      throw ConfigError("not enough images in labeled anomaly class " +
                        std::to_string(spec.labeled_anomaly_class));
    }
    for (std::size_t i = 0; i < m; ++i) {
      s.train.push_back(labeled_pool[i]);
      s.train_labels.push_back(RowLabel::anomaly);
    }
  }
  for (std::size_t i = n_train; i < normals.size(); ++i) add_eval(s, i < n_train + n_val, normals[i], false);
  std::vector<std::size_t> anomalies(labeled_pool.begin() + static_cast<std::ptrdiff_t>(m), labeled_pool.end());
  anomalies.insert(anomalies.end(), others.begin(), others.end());
  const std::size_t a_val = round_count(val_share, anomalies.size());
  for (std::size_t i = 0; i < anomalies.size(); ++i) add_eval(s, i < a_val, anomalies[i], true);
  return result;
}

Tensor images_as_matrix(const ImageCorpus& corpus, std::span<const std::size_t> indices) {
  const std::size_t d = corpus.dims.size();
  std::vector<double> values;
  values.reserve(indices.size() * d);
  for (std::size_t idx : indices) {
    if (idx >= corpus.count()) throw ConfigError("image index " + std::to_string(idx) + " out of range");
    const auto img = corpus.image(idx);
    values.insert(values.end(), img.begin(), img.end());
  }
  return Tensor::from({indices.size(), d}, std::move(values));
}

}  // namespace svddlab
