#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "svddlab/error.hpp"
#include "svddlab/evalreport.hpp"
#include "svddlab/trainer.hpp"

using namespace svddlab;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  ImageDims dims{1, 8, 8};
  SplitCorpus sc;
  TrainData data;
  EncoderSpec spec;

  explicit Fixture(bool semi = false, std::size_t n_per_class = 20) {
    const ImageCorpus naturals = generate_naturals(n_per_class, 3, dims, 3);
    SplitSpec split;
    split.semi_supervised = semi;
    sc = build_splits(naturals, split, CorruptionSpec::preset("bp2"), 5);
    data = TrainData::from_splits(sc.corpus, sc.splits, 16);
    spec.input_dim = dims.size();
    spec.layer_widths = {8, 4};
    spec.activation = Activation::tanh;
  }

  EncoderSpec spec_for(const TrainConfig& c) const {
    EncoderSpec s = spec;
    if (c.reg.kind == RegKind::noise) s.noise_head_k = c.reg.k;
    return s;
  }

  TrainResult run(const TrainConfig& c) const { return train(spec_for(c), c, data); }
};

TrainConfig small_config(RegKind kind) {
  TrainConfig c;
  c.reg.kind = kind;
  c.reg.k = 5;
  c.lr = 1e-3;
  c.batch_size = 10;
  c.max_epochs = 4;
  c.seed = 9;
  return c;
}

std::string csv_text(const std::vector<TrainLogRow>& rows) {
  std::ostringstream out;
  write_metrics_csv(out, rows);
  return out.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "svddlab_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("adam: first step of a unit gradient moves by lr") {
  Tensor p = Tensor::scalar(0.5, true);
  AdamMoments m;
  const double g[] = {1.0};
  adam_step(p, g, m, 1e-3, 1);
  CHECK(p.item() - 0.5 == doctest::Approx(-1e-3).epsilon(1e-7));
  CHECK(m.m[0] == doctest::Approx(0.1));
  CHECK(m.v[0] == doctest::Approx(0.001));
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Tensor p = Tensor::from({1, 3}, {1.0, -2.0, 3.0}, true);
  AdamMoments m;
  const double g[] = {0.0, 0.0, 0.0};
  adam_step(p, g, m, 1e-2, 1);
  CHECK(p.values()[0] == 1.0);
  CHECK(p.values()[1] == -2.0);
  CHECK(p.values()[2] == 3.0);
}

TEST_CASE("adam: second step matches the closed form") {
  Tensor p = Tensor::scalar(0.0, true);
  AdamMoments m;
  const double g1[] = {2.0}, g2[] = {-1.0};
  adam_step(p, g1, m, 0.1, 1);
  adam_step(p, g2, m, 0.1, 2);
  const double m2 = 0.9 * 0.2 + 0.1 * -1.0;
  const double v2 = 0.999 * 0.001 * 4.0 + 0.001 * 1.0;
  const double mhat = m2 / (1 - 0.81), vhat = v2 / (1 - 0.999 * 0.999);
  const double expected = -0.1 * 1.0 - 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
  CHECK(p.item() == doctest::Approx(expected).epsilon(1e-7));
}

TEST_CASE("adam: bad step index and non-finite gradients") {
  Tensor p = Tensor::scalar(0.0, true);
  AdamMoments m;
  const double g[] = {1.0};
  CHECK_THROWS_AS(adam_step(p, g, m, 1e-3, 0), ConfigError);
  const double bad[] = {std::nan("")};
  CHECK_THROWS_AS(adam_step(p, bad, m, 1e-3, 1), NumericError);
}

TEST_CASE("collapse metric examples") {
  CHECK(collapse_metric(Tensor::from({3, 2}, {1, 1, 1, 1, 1, 1})) == 0.0);
  CHECK(collapse_metric(Tensor::from({3, 1}, {0, 1, 2})) == 1.0);
  CHECK_THROWS(collapse_metric(Tensor::from({1, 2}, {0, 1})));
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.head_lr() == doctest::Approx(10 * c.lr));
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.batch_size = 1;
  c.reg.kind = RegKind::variance;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.weight_decay = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("training is deterministic, including checkpoints") {
  const Fixture fx;
  for (RegKind kind : {RegKind::none, RegKind::noise, RegKind::variance}) {
    const TrainConfig c = small_config(kind);
    const TrainResult a = fx.run(c), b = fx.run(c);
    CHECK(csv_text(a.log) == csv_text(b.log));
    save_model(temp_path("det_a.ckpt"), a.best_params, a.best_state);
    save_model(temp_path("det_b.ckpt"), b.best_params, b.best_state);
    CHECK(slurp(temp_path("det_a.ckpt")) == slurp(temp_path("det_b.ckpt")));
    TrainConfig other = c;
    other.seed = 10;
    CHECK(csv_text(fx.run(other).log) != csv_text(a.log));
  }
}

TEST_CASE("log shape: one row per iteration, epoch-end columns on the last") {
  const Fixture fx;
  const TrainConfig c = small_config(RegKind::none);
  const TrainResult r = fx.run(c);
  // A trailing batch is kept unless it has a single row.
  const std::size_t n = fx.data.train_x.rows();
  const std::size_t per_epoch = n / c.batch_size + (n % c.batch_size >= 2 ? 1 : 0);
  REQUIRE(r.log.size() == per_epoch * static_cast<std::size_t>(c.max_epochs));
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    const auto& row = r.log[i];
    CHECK(row.iter == static_cast<long>(i));
    CHECK(row.epoch == static_cast<int>(i / per_epoch));
    const bool last = (i + 1) % per_epoch == 0;
    CHECK(row.val_auc.has_value() == last);
    CHECK(row.collapse_metric.has_value() == last);
    // No regularizer: c_t stays 0 and L_reg is blank.
    CHECK(row.c_t == 0.0);
    CHECK_FALSE(row.l_reg.has_value());
    CHECK_FALSE(row.radius.has_value());
  }
}

TEST_CASE("noise regularizer starts at log 2 and c_t replays bitwise") {
  const Fixture fx;
  TrainConfig c = small_config(RegKind::noise);
  const TrainResult r = fx.run(c);
  REQUIRE_FALSE(r.log.empty());
  REQUIRE(r.log[0].l_reg.has_value());
  CHECK(std::abs(*r.log[0].l_reg - std::log(2.0)) < 1e-12);

  std::istringstream in(csv_text(r.log));
  const auto reloaded = parse_metrics_csv(in);
  double ct = c.reg.c0;
  for (const auto& row : reloaded) {
    ct = adaptive_weight_update(ct, row.l_svdd, *row.l_reg, c.reg.alpha, c.reg.beta);
    CHECK(std::memcmp(&ct, &row.c_t, sizeof(double)) == 0);
    CHECK(row.c_t >= 0.0);
  }
}

TEST_CASE("fixed weighting keeps c_t at 1") {
  const Fixture fx;
  TrainConfig c = small_config(RegKind::variance);
  c.reg.weighting = Weighting::fixed;
  for (const auto& row : fx.run(c).log) CHECK(row.c_t == 1.0);
}

TEST_CASE("variance threshold column follows the anneal schedule") {
  const Fixture fx;
  TrainConfig c = small_config(RegKind::variance);
  c.reg.r = 2;
  c.max_epochs = 5;
  const TrainResult r = fx.run(c);
  for (const auto& row : r.log) {
    REQUIRE(row.threshold.has_value());
    CHECK(*row.threshold == variance_threshold(row.epoch, c.reg.d0, c.reg.r));
  }
}

TEST_CASE("soft-boundary logs the per-batch radius") {
  const Fixture fx;
  TrainConfig c = small_config(RegKind::none);
  c.mode = SvddMode::soft_boundary;
  const TrainResult r = fx.run(c);
  for (const auto& row : r.log) {
    REQUIRE(row.radius.has_value());
    CHECK(*row.radius >= 0.0);
  }
  CHECK(r.final_state.radius == *r.log.back().radius);
}

TEST_CASE("best checkpoint reproduces the selected validation AUC") {
  const Fixture fx;
  TrainConfig c = small_config(RegKind::noise);
  c.max_epochs = 6;
  const TrainResult r = fx.run(c);
  REQUIRE(r.best_epoch >= 0);

  double best = -1.0;
  int best_epoch = -1;
  for (const auto& row : r.log) {
    if (!row.val_auc || row.collapsed.value_or(false)) continue;
    if (*row.val_auc > best) {
      best = *row.val_auc;
      best_epoch = row.epoch;
    }
  }
  CHECK(r.best_epoch == best_epoch);
  CHECK(r.best_val_auc == best);
  const auto scores = score_inputs(r.best_params, r.spec, r.best_state, fx.data.val_x);
  CHECK(roc_auc(scores, fx.data.val_truth) == r.best_val_auc);
}

TEST_CASE("soft-boundary scores and raw distances give the same AUC") {
  const Fixture fx;
  TrainConfig c = small_config(RegKind::none);
  c.mode = SvddMode::soft_boundary;
  const TrainResult r = fx.run(c);
  SvddState raw = r.final_state;
  raw.mode = SvddMode::one_class;
  const auto shifted = score_inputs(r.final_params, r.spec, r.final_state, fx.data.val_x);
  const auto d2 = score_inputs(r.final_params, r.spec, raw, fx.data.val_x);
  CHECK(r.final_state.radius > 0.0);
  CHECK(roc_auc(shifted, fx.data.val_truth) == roc_auc(d2, fx.data.val_truth));
}

TEST_CASE("head parameters use lr_head, encoder parameters use lr") {
  const Fixture fx;
  TrainConfig c = small_config(RegKind::noise);
  c.lr = 1e-3;
  c.lr_head = 4e-2;
  c.max_epochs = 1;
  c.batch_size = fx.data.train_x.rows();  // exactly one Adam step
  const EncoderSpec spec = fx.spec_for(c);
  Rng init_rng = Rng::stream(c.seed, 1);
  const EncoderParams init = init_params(spec, init_rng.next_u64());
  const TrainResult r = train(spec, c, fx.data);
  REQUIRE(r.log.size() == 1);

  // First Adam step: delta = -lr * g / (|g| + eps), so |delta| is lr up to eps / |g|.
  auto check_step = [](const Tensor& before, const Tensor& after, double lr) {
    int moved = 0;
    for (std::size_t i = 0; i < before.size(); ++i) {
      const double delta = std::abs(after.values()[i] - before.values()[i]);
      CHECK(delta <= lr * (1.0 + 1e-12));
      if (delta > 0.99 * lr) ++moved;
    }
    CHECK(moved > 0);
  };
  const auto enc_before = init.encoder_tensors(), enc_after = r.final_params.encoder_tensors();
  for (std::size_t i = 0; i < enc_before.size(); ++i) check_step(enc_before[i], enc_after[i], c.lr);
  check_step(init.head_weight, r.final_params.head_weight, *c.lr_head);
  check_step(init.head_bias, r.final_params.head_bias, *c.lr_head);
}

TEST_CASE("semi-supervised training uses the labeled anomalies") {
  const Fixture fx(true);
  TrainConfig c = small_config(RegKind::none);
  c.mode = SvddMode::semi_supervised;
  const TrainResult r = fx.run(c);
  CHECK_FALSE(r.aborted);
  for (const auto& row : r.log) CHECK(std::isfinite(row.l_svdd));
}

TEST_CASE("model checkpoint round-trip preserves scores") {
  const Fixture fx;
  TrainConfig c = small_config(RegKind::noise);
  c.mode = SvddMode::soft_boundary;
  const TrainResult r = fx.run(c);
  const fs::path p = temp_path("model.ckpt");
  save_model(p, r.final_params, r.final_state);
  SvddState hint;
  hint.mode = SvddMode::soft_boundary;
  const LoadedModel m = load_model(p, r.spec, hint);
  CHECK(m.state.center == r.final_state.center);
  CHECK(m.state.radius == r.final_state.radius);
  CHECK(score_inputs(m.params, r.spec, m.state, fx.data.val_x) ==
        score_inputs(r.final_params, r.spec, r.final_state, fx.data.val_x));

  EncoderSpec wrong = r.spec;
  wrong.layer_widths = {8, 5};
  CHECK_THROWS(load_model(p, wrong, hint));
}

TEST_CASE("probe batch takes normal validation images only") {
  const Fixture fx;
  std::size_t normals = 0;
  for (auto t : fx.sc.splits.val_truth) normals += t == 0 ? 1 : 0;
  CHECK(fx.data.probe_x.rows() == std::min<std::size_t>(16, normals));
  std::size_t k = 0;
  for (std::size_t i = 0; i < fx.sc.splits.val.size() && k < 16; ++i) {
    if (fx.sc.splits.val_truth[i] != 0) continue;
    const auto img = fx.sc.corpus.image(fx.sc.splits.val[i]);
    CHECK(fx.data.probe_x.at(k, 0) == static_cast<double>(img[0]));
    ++k;
  }
}
