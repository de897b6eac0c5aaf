#include <doctest.h>

#include <cmath>

#include "svddlab/error.hpp"
#include "svddlab/gradcheck.hpp"
#include "svddlab/random.hpp"
#include "svddlab/tensor.hpp"

using namespace svddlab;

namespace {

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }
std::vector<double> grads(const Tensor& t) { return {t.grad().begin(), t.grad().end()}; }

}  // namespace

TEST_CASE("matmul forward and backward on a 2x2 example") {
  const Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4}, true);
  const Tensor b = Tensor::from({2, 2}, {5, 6, 7, 8}, true);
  const Tensor c = matmul(a, b);
  CHECK(vals(c) == std::vector<double>{19, 22, 43, 50});
  backward(sum(c));
  // d sum(AB) / dA = 1 * B^T, row sums of B per column of A
  CHECK(grads(a) == std::vector<double>{11, 15, 11, 15});
  CHECK(grads(b) == std::vector<double>{4, 4, 6, 6});
}

TEST_CASE("shape errors name the op") {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({2, 3});
  try {
    (void)matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("matmul") != std::string::npos);
  }
  CHECK_THROWS_AS(add(a, Tensor::zeros({1, 2})), ShapeError);
  CHECK_THROWS_AS(sub(a, Tensor::zeros({3, 3})), ShapeError);
  CHECK_THROWS_AS(slice_rows(a, 1, 2), ShapeError);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
}

TEST_CASE("row broadcast in add accumulates gradient over rows") {
  const Tensor x = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6}, true);
  const Tensor b = Tensor::row({10, 20}, true);
  const Tensor y = add(x, b);
  CHECK(vals(y) == std::vector<double>{11, 22, 13, 24, 15, 26});
  backward(sum(y));
  CHECK(grads(b) == std::vector<double>{3, 3});
  CHECK(grads(x) == std::vector<double>(6, 1.0));
}

TEST_CASE("diamond graph: shared node visited once, gradients add") {
  const Tensor x = Tensor::scalar(3.0, true);
  const Tensor s = square(x);          // 9
  const Tensor y = add(s, s);          // 2 x^2
  backward(y);
  CHECK(x.grad()[0] == doctest::Approx(12.0));
}

TEST_CASE("backward zeroes intermediate gradients but accumulates into leaves") {
  const Tensor x = Tensor::scalar(2.0, true);
  const Tensor y = mul_scalar(x, 3.0);
  backward(y);
  backward(y);
  CHECK(x.grad()[0] == doctest::Approx(6.0));
  CHECK(y.grad()[0] == doctest::Approx(1.0));
  Tensor leaf = x;
  leaf.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("backward preconditions") {
  CHECK_THROWS_AS(backward(Tensor::zeros({2, 1}, true)), ShapeError);
  CHECK_THROWS(backward(Tensor::scalar(1.0, false)));
}

TEST_CASE("element-wise ops forward values") {
  const Tensor x = Tensor::row({-2.0, 0.5, 3.0});
  CHECK(vals(relu(x)) == std::vector<double>{0.0, 0.5, 3.0});
  CHECK(vals(leaky_relu(x, 0.01)) == std::vector<double>{-0.02, 0.5, 3.0});
  CHECK(vals(max_with_scalar(x, 1.0)) == std::vector<double>{1.0, 1.0, 3.0});
  CHECK(vals(square(x)) == std::vector<double>{4.0, 0.25, 9.0});
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  CHECK(tanh(Tensor::scalar(0.0)).item() == 0.0);
  CHECK(log(Tensor::scalar(1.0)).item() == 0.0);
  CHECK(reciprocal(Tensor::scalar(4.0)).item() == 0.25);
  CHECK(div_scalar(Tensor::scalar(3.0), 2.0).item() == 1.5);
  // Extreme logits stay finite.
  CHECK(sigmoid(Tensor::scalar(-800.0)).item() >= 0.0);
  CHECK(sigmoid(Tensor::scalar(800.0)).item() == 1.0);
}

TEST_CASE("reductions along each axis") {
  const Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(sum(x).item() == 21.0);
  CHECK(vals(sum(x, Axis::rows)) == std::vector<double>{5, 7, 9});
  CHECK(vals(sum(x, Axis::cols)) == std::vector<double>{6, 15});
  CHECK(mean(x).item() == 3.5);
  CHECK(vals(mean(x, Axis::rows)) == std::vector<double>{2.5, 3.5, 4.5});
  CHECK(vals(mean(x, Axis::cols)) == std::vector<double>{2, 5});
}

TEST_CASE("row selection ops") {
  const Tensor x = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6}, true);
  CHECK(vals(slice_rows(x, 1, 2)) == std::vector<double>{3, 4, 5, 6});
  const std::size_t idx[] = {2, 2, 0};
  const Tensor g = gather_rows(x, idx);
  CHECK(vals(g) == std::vector<double>{5, 6, 5, 6, 1, 2});
  backward(sum(g));
  CHECK(grads(x) == std::vector<double>{1, 1, 0, 0, 2, 2});
  const Tensor parts[] = {x, Tensor::row({7, 8})};
  CHECK(concat_rows(parts).rows() == 4);
  const std::size_t bad[] = {3};
  CHECK_THROWS_AS(gather_rows(x, bad), ShapeError);
}

TEST_CASE("sigmoid_bce uses the stable form") {
  const Tensor z = Tensor::scalar(10.0);
  const Tensor y = Tensor::scalar(1.0);
  CHECK(sigmoid_bce(z, y).item() == doctest::Approx(std::log1p(std::exp(-10.0))).epsilon(1e-12));
  CHECK(std::isfinite(sigmoid_bce(Tensor::scalar(1e4), Tensor::scalar(0.0)).item()));
  CHECK(sigmoid_bce(Tensor::zeros({3, 4}), Tensor::zeros({3, 4})).item() == doctest::Approx(std::log(2.0)));
}

TEST_CASE("assign is only allowed on leaves") {
  Tensor x = Tensor::scalar(1.0, true);
  Tensor y = mul_scalar(x, 2.0);
  const double v[] = {5.0};
  x.assign(v);
  CHECK(x.item() == 5.0);
  CHECK_THROWS(y.assign(v));
}

TEST_CASE("detach produces an independent leaf") {
  const Tensor x = Tensor::scalar(2.0, true);
  const Tensor y = square(x);
  const Tensor d = y.detach(true);
  CHECK(d.is_leaf());
  CHECK(d.op() == OpKind::leaf);
  backward(mul_scalar(d, 3.0));
  CHECK(x.grad()[0] == 0.0);
  CHECK(d.grad()[0] == 3.0);
}

TEST_CASE("grad_check: constant function has zero error") {
  const Tensor x = Tensor::row({1.0, 2.0});
  CHECK(grad_check([](const Tensor&) { return Tensor::scalar(4.0, true); }, x) == 0.0);
}

TEST_CASE("grad_check: exact gradient of sum of squares passes at 1e-4") {
  Rng rng(3);
  std::vector<double> v(12);
  for (double& e : v) e = rng.uniform(-2.0, 2.0);
  const Tensor x = Tensor::from({3, 4}, v);
  CHECK(grad_check([](const Tensor& t) { return sum(square(t)); }, x) < 1e-4);
}

TEST_CASE("grad_check rejects bad eps and non-finite values") {
  const Tensor x = Tensor::scalar(1.0);
  auto f = [](const Tensor& t) { return sum(t); };
  CHECK_THROWS_AS(grad_check(f, x, 0.0), ConfigError);
  CHECK_THROWS_AS(grad_check(f, x, 0.1), ConfigError);
  const Tensor zero = Tensor::scalar(0.0);
  CHECK_THROWS_AS(grad_check([](const Tensor& t) { return log(t); }, zero), NumericError);
}

TEST_CASE("grad_check flags a wrong backward rule") {
  const Tensor x = Tensor::row({0.3, -0.7, 1.1});
  auto wrong = [](const Tensor& t) {
    std::vector<double> out(t.values().begin(), t.values().end());
    for (double& v : out) v = v * v;
    const Tensor in[] = {t};
    const Tensor y = custom(in, t.shape(), out, [](std::span<const double> up, std::span<const Tensor> ins) {
      std::vector<double> g(up.size());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = -2.0 * ins[0].values()[i] * up[i];
      return std::vector<std::vector<double>>{g};
    });
    return sum(y);
  };
  CHECK(grad_check(wrong, x) > 1e-2);
}

TEST_CASE("random streams are deterministic and distinct") {
  Rng a = Rng::stream(42, 1), b = Rng::stream(42, 1), c = Rng::stream(42, 2);
  const auto va = a.next_u64();
  CHECK(va == b.next_u64());
  CHECK(va != c.next_u64());
  Rng r(9);
  for (int i = 0; i < 1000; ++i) {
    const auto k = r.uniform_int(-3, 5);
    CHECK(k >= -3);
    CHECK(k <= 5);
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
