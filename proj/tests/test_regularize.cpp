#include <doctest.h>

#include <cmath>

#include "svddlab/error.hpp"
#include "svddlab/gradcheck.hpp"
#include "svddlab/random.hpp"
#include "svddlab/regularize.hpp"

using namespace svddlab;

namespace {

double naive_bce(const std::vector<double>& z, const std::vector<double>& y) {
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    // 1 - sigmoid(z) written as sigmoid(-z); subtracting from 1 alone loses ~1e-8 at |z| = 20.
    const double p = 1.0 / (1.0 + std::exp(-z[i]));
    const double q = 1.0 / (1.0 + std::exp(z[i]));
    total += -(y[i] * std::log(p) + (1.0 - y[i]) * std::log(q));
  }
  return total / static_cast<double>(z.size());
}

double variance_oracle(const std::vector<double>& v, std::size_t n, std::size_t p) {
  double total = 0.0;
  for (std::size_t q = 0; q < p; ++q) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += v[i * p + q];
    m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) total += (v[i * p + q] - m) * (v[i * p + q] - m);
  }
  return total / (static_cast<double>(p) * static_cast<double>(n - 1));
}

}  // namespace

TEST_CASE("random labels are deterministic fair bits") {
  Rng a = Rng::stream(3, 3), b = Rng::stream(3, 3);
  const Tensor la = sample_random_labels(200, 30, a);
  const Tensor lb = sample_random_labels(200, 30, b);
  double ones = 0.0;
  for (std::size_t i = 0; i < la.size(); ++i) {
    CHECK(la.values()[i] == lb.values()[i]);
    CHECK((la.values()[i] == 0.0 || la.values()[i] == 1.0));
    ones += la.values()[i];
  }
  CHECK(ones / 6000.0 == doctest::Approx(0.5).epsilon(0.05));
  Rng c(1);
  const Tensor one = sample_random_labels(1, 1, c);
  CHECK(one.shape() == Shape{1, 1});
}

TEST_CASE("noise loss: zero logits give log 2 for every label draw") {
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const Tensor labels = sample_random_labels(7, 5, rng);
    CHECK(noise_reg_loss(Tensor::zeros({7, 5}), labels).item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  }
}

TEST_CASE("noise loss examples") {
  CHECK(noise_reg_loss(Tensor::scalar(10.0), Tensor::scalar(1.0)).item() ==
        doctest::Approx(4.5398899e-5).epsilon(1e-6));
  const Tensor z = Tensor::from({1, 2}, {0.0, 800.0});
  const Tensor y = Tensor::from({1, 2}, {0.0, 1.0});
  CHECK(noise_reg_loss(z, y).item() == doctest::Approx(0.5 * std::log(2.0)));
  CHECK_THROWS_AS(noise_reg_loss(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), ShapeError);
}

TEST_CASE("stable noise loss matches the naive formula for |z| <= 20") {
  Rng rng(10);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> z(12), y(12);
    for (double& v : z) v = rng.uniform(-20.0, 20.0);
    for (double& v : y) v = rng.bernoulli_half() ? 1.0 : 0.0;
    const double stable = noise_reg_loss(Tensor::from({3, 4}, z), Tensor::from({3, 4}, y)).item();
    CHECK(std::abs(stable - naive_bce(z, y)) < 1e-9);
  }
}

TEST_CASE("variance threshold schedule") {
  CHECK(variance_threshold(0, 0.1, 3) == 0.1);
  CHECK(variance_threshold(2, 0.1, 3) == 0.1);
  CHECK(variance_threshold(3, 0.1, 3) == doctest::Approx(0.01));
  CHECK(variance_threshold(6, 0.1, 3) == doctest::Approx(0.001));
  for (int e = 0; e < 8; ++e) CHECK(variance_threshold(e, 2.0, 1) == doctest::Approx(2.0 * std::pow(10.0, -e)));
  double prev = 1e9;
  for (int e = 0; e < 40; ++e) {
    const double t = variance_threshold(e, 0.1, 4);
    CHECK(t <= prev);
    CHECK(t == variance_threshold(e - e % 4, 0.1, 4));
    prev = t;
  }
  CHECK_THROWS_AS(variance_threshold(0, 0.1, 0), ConfigError);
}

TEST_CASE("variance regularizer examples") {
  CHECK(variance_reg_loss(Tensor::from({3, 2}, {1, 2, 1, 2, 1, 2}), 0.1).item() == doctest::Approx(0.1));
  CHECK(batch_variance(Tensor::from({3, 1}, {0, 1, 2})) == 1.0);
  CHECK(variance_reg_loss(Tensor::from({3, 1}, {0, 1, 2}), 0.1).item() == 0.0);
  CHECK_THROWS(variance_reg_loss(Tensor::from({1, 2}, {1, 2}), 0.1));

  // Inactive hinge gives a zero gradient.
  const Tensor f = Tensor::from({3, 1}, {0, 1, 2}, true);
  backward(mul_scalar(variance_reg_loss(f, 0.1), 1.0));
  for (double g : f.grad()) CHECK(g == 0.0);
}

TEST_CASE("batch variance matches a two-pass oracle and is translation invariant") {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(2, 20));
    const auto p = static_cast<std::size_t>(rng.uniform_int(1, 6));
    std::vector<double> v(n * p);
    for (double& e : v) e = rng.uniform(-2.0, 2.0);
    const Tensor f = Tensor::from({n, p}, v);
    CHECK(batch_variance(f) == doctest::Approx(variance_oracle(v, n, p)).epsilon(1e-12));

    std::vector<double> shift(p);
    for (double& e : shift) e = rng.uniform(-50.0, 50.0);
    const Tensor shifted = add(f, Tensor::row(shift));
    const double t = rng.uniform(0.0, 2.0);
    CHECK(variance_reg_loss(shifted, t).item() ==
          doctest::Approx(variance_reg_loss(f, t).item()).epsilon(1e-9));
  }
}

TEST_CASE("variance regularizer gradient passes the finite-difference check") {
  Rng rng(13);
  std::vector<double> v(10);
  for (double& e : v) e = rng.uniform(-0.1, 0.1);
  const Tensor f = Tensor::from({5, 2}, v);
  CHECK(grad_check([](const Tensor& t) { return variance_reg_loss(t, 0.5); }, f) < 1e-4);
}

TEST_CASE("adaptive weight update examples") {
  CHECK(adaptive_weight_update(0.0, 2.0, 1.0, 0.9, 0.5) == doctest::Approx(0.1));
  CHECK(adaptive_weight_update(3.7, 2.0, 1.0, 1.0, 0.5) == 3.7);
  const double guarded = adaptive_weight_update(0.0, 1e-3, 0.0, 0.9, 0.5);
  CHECK(std::isfinite(guarded));
  CHECK(guarded == doctest::Approx(0.05 * 1e-3 / 1e-8));
  CHECK(adaptive_weight_update(0.0, 10.0, 0.0, 0.9, 0.5) == 1e6);
  CHECK_THROWS_AS(adaptive_weight_update(0.0, -1.0, 1.0, 0.9, 0.5), ConfigError);
  CHECK_THROWS_AS(adaptive_weight_update(0.0, 1.0, -1.0, 0.9, 0.5), ConfigError);
}

TEST_CASE("c_t stays non-negative for non-negative losses") {
  Rng rng(14);
  double c = 0.0;
  for (int t = 0; t < 1000; ++t) {
    c = adaptive_weight_update(c, rng.uniform(0.0, 3.0), rng.uniform(0.0, 1.0), 0.9, 0.5);
    CHECK(c >= 0.0);
  }
}

TEST_CASE("total loss") {
  const Tensor a = Tensor::scalar(0.5, true), b = Tensor::scalar(0.7, true);
  CHECK(total_loss(a, b, 0.0).item() == 0.5);
  CHECK(total_loss(a, b, 1.0).item() == doctest::Approx(1.2));
  const Tensor t = total_loss(a, b, 2.5);
  backward(t);
  CHECK(a.grad()[0] == 1.0);
  CHECK(b.grad()[0] == 2.5);
}

TEST_CASE("gradient of the total equals the weighted sum of the parts") {
  Rng rng(15);
  std::vector<double> v(8);
  for (double& e : v) e = rng.uniform(-0.05, 0.05);
  const Tensor f = Tensor::from({4, 2}, v);
  auto loss = [](const Tensor& t) {
    return total_loss(mean(square(t)), variance_reg_loss(t, 0.5), 3.0);
  };
  CHECK(grad_check(loss, f) < 1e-4);
}

TEST_CASE("reg config validation and names") {
  RegConfig c;
  c.alpha = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RegConfig{};
  c.k = 0;
  CHECK_NOTHROW(c.validate());
  c.kind = RegKind::noise;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RegConfig{};
  c.c0 = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_reg_kind("variance") == RegKind::variance);
  CHECK(parse_weighting("fixed") == Weighting::fixed);
  CHECK_THROWS_AS(parse_reg_kind("both"), ConfigError);
}
