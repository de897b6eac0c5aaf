#include "svddlab/gradsuite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "svddlab/encoder.hpp"
#include "svddlab/error.hpp"
#include "svddlab/gradcheck.hpp"
#include "svddlab/objective.hpp"
#include "svddlab/random.hpp"
#include "svddlab/regularize.hpp"

namespace svddlab {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape.size());
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(shape, std::move(v));
}

// Values with magnitude in [0.2, 1] and random sign, away from kinks and poles.
Tensor away_from_zero(Shape shape, Rng& rng) {
  std::vector<double> v(shape.size());
  for (double& x : v) x = rng.uniform(0.2, 1.0) * (rng.bernoulli_half() ? 1.0 : -1.0);
  return Tensor::from(shape, std::move(v));
}

// Random bilinear readout l * y * r, so every entry of y gets its own weight.
std::function<Tensor(const Tensor&)> readout(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  const Tensor l = random_tensor({1, shape.rows}, rng);
  const Tensor r = random_tensor({shape.cols, 1}, rng);
  return [l, r](const Tensor& y) { return matmul(matmul(l, y), r); };
}

GradCase unary_case(std::string name, std::uint64_t seed, Shape shape, bool positive,
                    std::function<Tensor(const Tensor&)> op) {
  return {std::move(name), [=] {
            Rng rng(seed);
            const Tensor x = positive ? random_tensor(shape, rng, 0.3, 2.0) : away_from_zero(shape, rng);
            const auto read = readout(op(x).shape(), seed + 1);
            return grad_check([&](const Tensor& v) { return read(op(v)); }, x);
          }};
}

struct LossFixture {
  EncoderSpec spec;
  EncoderParams params;
  Tensor x;
};

LossFixture make_fixture(std::uint64_t seed, bool head) {
  LossFixture f;
  f.spec.input_dim = 6;
  f.spec.layer_widths = {5, 3};
  f.spec.use_bias = true;
  f.spec.activation = Activation::tanh;
  if (head) f.spec.noise_head_k = 4;
  f.params = init_params(f.spec, seed);
  Rng rng(seed + 7);
  // Non-zero head so gradients reach the encoder through it.
  if (head) {
    f.params.head_weight.assign(random_tensor(f.params.head_weight.shape(), rng).values());
    f.params.head_bias.assign(random_tensor(f.params.head_bias.shape(), rng).values());
  }
  for (auto& b : f.params.biases) b.assign(random_tensor(b.shape(), rng, -0.3, 0.3).values());
  f.x = random_tensor({8, 6}, rng, 0.0, 1.0);
  return f;
}

// Worst grad_check error of loss(params) over every parameter tensor.
double check_all_params(const LossFixture& fx, const std::function<Tensor(const EncoderParams&)>& loss) {
  const auto named = fx.params.named();
  double worst = 0.0;
  for (std::size_t i = 0; i < named.size(); ++i) {
    auto f = [&](const Tensor& v) {
      EncoderParams p = fx.params.clone(false);
      std::size_t idx = 0;
      auto rebind = [&](Tensor& t) {
        if (idx++ == i) t = v;
      };
      for (std::size_t l = 0; l < p.weights.size(); ++l) {
        rebind(p.weights[l]);
        if (l < p.biases.size()) rebind(p.biases[l]);
      }
      if (p.has_head()) {
        rebind(p.head_weight);
        rebind(p.head_bias);
      }
      return loss(p);
    };
    worst = std::max(worst, grad_check(f, named[i].tensor.detach()));
  }
  return worst;
}

std::vector<RowLabel> semi_labels(std::size_t n) {
  std::vector<RowLabel> labels(n, RowLabel::unlabeled);
  labels[1] = RowLabel::normal;
  labels[3] = RowLabel::anomaly;
  labels[6] = RowLabel::anomaly;
  return labels;
}

}  // namespace

std::vector<GradCase> default_grad_cases() {
  std::vector<GradCase> cases;
  const Shape s{4, 3};

  cases.push_back({"matmul", [] {
                     Rng rng(11);
                     const Tensor a = random_tensor({4, 3}, rng);
                     const Tensor b = random_tensor({3, 5}, rng);
                     const auto read = readout({4, 5}, 12);
                     const double ea = grad_check([&](const Tensor& v) { return read(matmul(v, b)); }, a);
                     const double eb = grad_check([&](const Tensor& v) { return read(matmul(a, v)); }, b);
                     return std::max(ea, eb);
                   }});
  cases.push_back({"add_broadcast", [] {
                     Rng rng(13);
                     const Tensor a = random_tensor({4, 3}, rng);
                     const Tensor row = random_tensor({1, 3}, rng);
                     const Tensor full = random_tensor({4, 3}, rng);
                     const auto read = readout({4, 3}, 14);
                     double e = grad_check([&](const Tensor& v) { return read(add(v, row)); }, a);
                     e = std::max(e, grad_check([&](const Tensor& v) { return read(add(a, v)); }, row));
                     e = std::max(e, grad_check([&](const Tensor& v) { return read(add(a, v)); }, full));
                     return e;
                   }});
  cases.push_back({"sub", [] {
                     Rng rng(15);
                     const Tensor a = random_tensor({4, 3}, rng);
                     const Tensor row = random_tensor({1, 3}, rng);
                     const auto read = readout({4, 3}, 16);
                     const double ea = grad_check([&](const Tensor& v) { return read(sub(v, row)); }, a);
                     const double eb = grad_check([&](const Tensor& v) { return read(sub(a, v)); }, row);
                     return std::max(ea, eb);
                   }});
  cases.push_back(unary_case("relu", 17, s, false, [](const Tensor& x) { return relu(x); }));
  cases.push_back(unary_case("leaky_relu", 19, s, false, [](const Tensor& x) { return leaky_relu(x, 0.01); }));
  cases.push_back(unary_case("sigmoid", 21, s, false, [](const Tensor& x) { return sigmoid(x); }));
  cases.push_back(unary_case("tanh", 23, s, false, [](const Tensor& x) { return tanh(x); }));
  cases.push_back(unary_case("square", 25, s, false, [](const Tensor& x) { return square(x); }));
  cases.push_back(unary_case("log", 27, s, true, [](const Tensor& x) { return log(x); }));
  cases.push_back(unary_case("reciprocal", 29, s, true, [](const Tensor& x) { return reciprocal(x); }));
  cases.push_back({"sum", [] {
                     double e = 0.0;
                     for (Axis axis : {Axis::all, Axis::rows, Axis::cols}) {
                       Rng rng(31);
                       const Tensor x = random_tensor({4, 3}, rng);
                       const auto read = readout(sum(x, axis).shape(), 32);
                       e = std::max(e, grad_check([&](const Tensor& v) { return read(sum(v, axis)); }, x));
                     }
                     return e;
                   }});
  cases.push_back({"mean", [] {
                     double e = 0.0;
                     for (Axis axis : {Axis::all, Axis::rows, Axis::cols}) {
                       Rng rng(33);
                       const Tensor x = random_tensor({4, 3}, rng);
                       const auto read = readout(mean(x, axis).shape(), 34);
                       e = std::max(e, grad_check([&](const Tensor& v) { return read(mean(v, axis)); }, x));
                     }
                     return e;
                   }});
  cases.push_back(unary_case("max_with_scalar", 35, s, false,
                             [](const Tensor& x) { return max_with_scalar(x, 0.05); }));
  cases.push_back(unary_case("mul_scalar", 37, s, false, [](const Tensor& x) { return mul_scalar(x, -2.5); }));
  cases.push_back(unary_case("div_scalar", 39, s, false, [](const Tensor& x) { return div_scalar(x, 3.0); }));
  cases.push_back({"concat_rows", [] {
                     Rng rng(41);
                     const Tensor a = random_tensor({2, 3}, rng);
                     const Tensor b = random_tensor({3, 3}, rng);
                     const auto read = readout({5, 3}, 42);
                     const double ea = grad_check(
                         [&](const Tensor& v) {
                           const Tensor parts[] = {v, b};
                           return read(concat_rows(parts));
                         },
                         a);
                     const double eb = grad_check(
                         [&](const Tensor& v) {
                           const Tensor parts[] = {a, v};
                           return read(concat_rows(parts));
                         },
                         b);
                     return std::max(ea, eb);
                   }});
  cases.push_back(unary_case("slice_rows", 43, {5, 3}, false, [](const Tensor& x) { return slice_rows(x, 1, 3); }));
  cases.push_back(unary_case("gather_rows", 45, {5, 3}, false, [](const Tensor& x) {
    const std::size_t idx[] = {4, 0, 4, 2};
    return gather_rows(x, idx);
  }));
  cases.push_back({"sigmoid_bce", [] {
                     Rng rng(47);
                     const Tensor z = random_tensor({4, 3}, rng, -3.0, 3.0);
                     Rng labels(48);
                     const Tensor y = sample_random_labels(4, 3, labels);
                     return grad_check([&](const Tensor& v) { return sigmoid_bce(v, y); }, z);
                   }});
  cases.push_back(unary_case("custom", 49, s, false, [](const Tensor& x) {
    // Element-wise cube with a hand-written backward rule.
    std::vector<double> out(x.values().begin(), x.values().end());
    for (double& v : out) v = v * v * v;
    const Tensor inputs[] = {x};
    return custom(inputs, x.shape(), std::move(out),
                  [](std::span<const double> up, std::span<const Tensor> in) {
                    std::vector<double> g(up.size());
                    const auto xv = in[0].values();
                    for (std::size_t i = 0; i < g.size(); ++i) g[i] = up[i] * 3.0 * xv[i] * xv[i];
                    return std::vector<std::vector<double>>{g};
                  });
  }));

  const double lambda = 5e-4;
  cases.push_back({"loss_soft_boundary", [=] {
                     LossFixture fx = make_fixture(51, false);
                     SvddState st;
                     st.mode = SvddMode::soft_boundary;
                     st.nu = 0.25;
                     const Tensor feats = encode(fx.params.clone(false), fx.spec, fx.x);
                     st.center = init_center(feats);
                     const Tensor d2 = squared_distances(feats, st.center);
                     std::vector<double> d(d2.values().begin(), d2.values().end());
                     for (double& v : d) v = std::sqrt(v);
                     st.radius = update_radius(d, st.nu);
                     // Step off the hinge kink at the radius itself.
                     st.radius *= 0.97;
                     return check_all_params(fx, [&](const EncoderParams& p) {
                       return svdd_loss(encode(p, fx.spec, fx.x), st, {}, weight_decay_term(p, lambda));
                     });
                   }});
  cases.push_back({"loss_one_class", [=] {
                     LossFixture fx = make_fixture(53, false);
                     SvddState st;
                     st.center = init_center(encode(fx.params.clone(false), fx.spec, fx.x));
                     return check_all_params(fx, [&](const EncoderParams& p) {
                       return svdd_loss(encode(p, fx.spec, fx.x), st, {}, weight_decay_term(p, lambda));
                     });
                   }});
  cases.push_back({"loss_semi_supervised", [=] {
                     LossFixture fx = make_fixture(55, false);
                     SvddState st;
                     st.mode = SvddMode::semi_supervised;
                     st.center = init_center(encode(fx.params.clone(false), fx.spec, fx.x));
                     const auto labels = semi_labels(fx.x.rows());
                     return check_all_params(fx, [&](const EncoderParams& p) {
                       return svdd_loss(encode(p, fx.spec, fx.x), st, labels, weight_decay_term(p, lambda));
                     });
                   }});
  cases.push_back({"loss_noise_reg", [=] {
                     LossFixture fx = make_fixture(57, true);
                     SvddState st;
                     st.center = init_center(encode(fx.params.clone(false), fx.spec, fx.x));
                     Rng labels_rng(58);
                     const Tensor y = sample_random_labels(fx.x.rows(), 4, labels_rng);
                     return check_all_params(fx, [&](const EncoderParams& p) {
                       const Tensor feats = encode(p, fx.spec, fx.x);
                       const Tensor l_svdd = svdd_loss(feats, st, {}, weight_decay_term(p, lambda));
                       return total_loss(l_svdd, noise_reg_loss(head_logits(p, feats), y), 0.7);
                     });
                   }});
  cases.push_back({"loss_variance_reg", [=] {
                     LossFixture fx = make_fixture(59, false);
                     SvddState st;
                     const Tensor feats0 = encode(fx.params.clone(false), fx.spec, fx.x);
                     st.center = init_center(feats0);
                     // Threshold well above the batch variance keeps the hinge active.
                     const double threshold = batch_variance(feats0) + 1.0;
                     return check_all_params(fx, [&](const EncoderParams& p) {
                       const Tensor feats = encode(p, fx.spec, fx.x);
                       const Tensor l_svdd = svdd_loss(feats, st, {}, weight_decay_term(p, lambda));
                       return total_loss(l_svdd, variance_reg_loss(feats, threshold), 1.3);
                     });
                   }});
  return cases;
}

std::vector<GradRow> run_grad_suite(const std::vector<GradCase>& cases, double tolerance) {
  std::vector<GradRow> rows;
  rows.reserve(cases.size());
  for (const auto& c : cases) {
    GradRow row;
    row.name = c.name;
    try {
      row.max_error = c.max_error();
      row.pass = std::isfinite(row.max_error) && row.max_error < tolerance;
    } catch (const std::exception&) {
      row.max_error = std::numeric_limits<double>::infinity();
      row.pass = false;
    }
    rows.push_back(row);
  }
  return rows;
}

void print_grad_table(std::ostream& out, const std::vector<GradRow>& rows) {
  std::size_t width = 4;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  char buf[64];
  out << std::string("case") << std::string(width - 4 + 2, ' ') << "max_error     result\n";
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.3e", r.max_error);
    out << r.name << std::string(width - r.name.size() + 2, ' ') << buf << "     " << (r.pass ? "pass" : "fail")
        << "\n";
  }
}

}  // namespace svddlab
