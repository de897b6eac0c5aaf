#include "svddlab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "svddlab/error.hpp"

namespace svddlab {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
  OpKind op = OpKind::leaf;
  std::vector<Tensor> inputs;

  // Op attributes.
  double scalar = 0.0;
  Axis axis = Axis::all;
  std::vector<std::size_t> indices;
  std::size_t offset = 0;
  CustomVjp vjp;

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

}  // namespace detail

using detail::Node;

std::string Shape::str() const {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::add_broadcast: return "add_broadcast";
    case OpKind::sub: return "sub";
    case OpKind::relu: return "relu";
    case OpKind::leaky_relu: return "leaky_relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::tanh: return "tanh";
    case OpKind::square: return "square";
    case OpKind::log: return "log";
    case OpKind::reciprocal: return "reciprocal";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::max_with_scalar: return "max_with_scalar";
    case OpKind::mul_scalar: return "mul_scalar";
    case OpKind::div_scalar: return "div_scalar";
    case OpKind::concat_rows: return "concat_rows";
    case OpKind::slice_rows: return "slice_rows";
    case OpKind::gather_rows: return "gather_rows";
    case OpKind::sigmoid_bce: return "sigmoid_bce";
    case OpKind::custom: return "custom";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Tensor handle

namespace {

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape.rows == 0 || shape.cols == 0) {
    throw ShapeError("tensor dimensions must be positive, got " + shape.str());
  }
  if (values.size() != shape.size()) {
    throw ShapeError("tensor of shape " + shape.str() + " needs " + std::to_string(shape.size()) +
                     " values, got " + std::to_string(values.size()));
  }
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  if (requires_grad) node->ensure_grad();
  return node;
}

const Node& deref(const std::shared_ptr<Node>& node) {
  if (!node) throw ConfigError("use of an undefined tensor");
  return *node;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(make_leaf(shape, std::vector<double>(shape.size(), 0.0), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(make_leaf(shape, std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1, 1}, {value}, requires_grad);
}

Tensor Tensor::row(std::vector<double> values, bool requires_grad) {
  const Shape shape{1, values.size()};
  return from(shape, std::move(values), requires_grad);
}

Tensor Tensor::column(std::vector<double> values, bool requires_grad) {
  const Shape shape{values.size(), 1};
  return from(shape, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const { return deref(node_).shape; }
std::span<const double> Tensor::values() const { return deref(node_).values; }

double Tensor::at(std::size_t r, std::size_t c) const {
  const Node& n = deref(node_);
  if (r >= n.shape.rows || c >= n.shape.cols) {
    throw ShapeError("index (" + std::to_string(r) + "," + std::to_string(c) +
                     ") out of range for " + n.shape.str());
  }
  return n.values[r * n.shape.cols + c];
}

double Tensor::item() const {
  const Node& n = deref(node_);
  if (!n.shape.is_scalar()) throw ShapeError("item() on non-scalar tensor " + n.shape.str());
  return n.values[0];
}

bool Tensor::requires_grad() const { return deref(node_).requires_grad; }
bool Tensor::is_leaf() const { return deref(node_).op == OpKind::leaf; }
OpKind Tensor::op() const { return deref(node_).op; }

std::span<const double> Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::assign(std::span<const double> values) {
  Node& n = *node_;
  if (n.op != OpKind::leaf) throw ConfigError("assign() is only valid on leaf tensors");
  if (values.size() != n.values.size()) {
    throw ShapeError("assign(): expected " + std::to_string(n.values.size()) + " values, got " +
                     std::to_string(values.size()));
  }
  std::copy(values.begin(), values.end(), n.values.begin());
}

Tensor Tensor::detach(bool requires_grad) const {
  const Node& n = deref(node_);
  return from(n.shape, n.values, requires_grad);
}

// ---------------------------------------------------------------------------
// Forward ops

namespace {

[[noreturn]] void shape_fail(OpKind op, const std::string& detail) {
  throw ShapeError(std::string(op_name(op)) + ": " + detail);
}

Tensor make_op(OpKind op, std::vector<Tensor> inputs, Shape shape, std::vector<double> values) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->shape = shape;
  node->values = std::move(values);
  node->requires_grad =
      std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (node->requires_grad) node->inputs = std::move(inputs);
  return Tensor(std::move(node));
}

template <typename F>
Tensor unary(OpKind op, const Tensor& x, F&& f) {
  std::vector<double> out(x.size());
  const auto in = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return make_op(op, {x}, x.shape(), std::move(out));
}

void check_broadcast(OpKind op, const Shape& a, const Shape& b) {
  if (a == b) return;
  if (b.rows == 1 && b.cols == a.cols) return;
  shape_fail(op, "cannot combine " + a.str() + " with " + b.str());
}

Tensor binary_broadcast(OpKind op, const Tensor& a, const Tensor& b, double sign) {
  check_broadcast(op, a.shape(), b.shape());
  const auto av = a.values();
  const auto bv = b.values();
  const std::size_t cols = a.cols();
  const bool row_bcast = b.shape() != a.shape();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = av[i] + sign * bv[row_bcast ? i % cols : i];
  }
  return make_op(op, {a, b}, a.shape(), std::move(out));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_fail(OpKind::matmul, a.shape().str() + " x " + b.shape().str());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = out.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      const double* brow = bv.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aip * brow[j];
    }
  }
  return make_op(OpKind::matmul, {a, b}, {n, m}, std::move(out));
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_broadcast(OpKind::add_broadcast, a, b, 1.0);
}

Tensor sub(const Tensor& a, const Tensor& b) { return binary_broadcast(OpKind::sub, a, b, -1.0); }

Tensor relu(const Tensor& x) {
  return unary(OpKind::relu, x, [](double v) { return v > 0.0 ? v : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  Tensor out = unary(OpKind::leaky_relu, x, [slope](double v) { return v > 0.0 ? v : slope * v; });
  out.node()->scalar = slope;
  return out;
}

Tensor sigmoid(const Tensor& x) {
  return unary(OpKind::sigmoid, x, [](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

Tensor tanh(const Tensor& x) {
  return unary(OpKind::tanh, x, [](double v) { return std::tanh(v); });
}

Tensor square(const Tensor& x) {
  return unary(OpKind::square, x, [](double v) { return v * v; });
}

Tensor log(const Tensor& x) {
  return unary(OpKind::log, x, [](double v) { return std::log(v); });
}

Tensor reciprocal(const Tensor& x) {
  return unary(OpKind::reciprocal, x, [](double v) { return 1.0 / v; });
}

namespace {

Tensor reduce(OpKind op, const Tensor& x, Axis axis) {
  const std::size_t rows = x.rows(), cols = x.cols();
  const auto v = x.values();
  Shape shape;
  std::vector<double> out;
  double count = 1.0;
  switch (axis) {
    case Axis::all: {
      double acc = 0.0;
      for (double e : v) acc += e;
      shape = {1, 1};
      out = {acc};
      count = static_cast<double>(v.size());
      break;
    }
    case Axis::rows: {
      shape = {1, cols};
      out.assign(cols, 0.0);
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) out[j] += v[i * cols + j];
      }
      count = static_cast<double>(rows);
      break;
    }
    case Axis::cols: {
      shape = {rows, 1};
      out.assign(rows, 0.0);
      for (std::size_t i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < cols; ++j) acc += v[i * cols + j];
        out[i] = acc;
      }
      count = static_cast<double>(cols);
      break;
    }
  }
  if (op == OpKind::mean) {
    for (double& e : out) e /= count;
  }
  Tensor t = make_op(op, {x}, shape, std::move(out));
  t.node()->axis = axis;
  t.node()->scalar = count;
  return t;
}

}  // namespace

Tensor sum(const Tensor& x, Axis axis) { return reduce(OpKind::sum, x, axis); }
Tensor mean(const Tensor& x, Axis axis) { return reduce(OpKind::mean, x, axis); }

Tensor max_with_scalar(const Tensor& x, double s) {
  Tensor out = unary(OpKind::max_with_scalar, x, [s](double v) { return v > s ? v : s; });
  out.node()->scalar = s;
  return out;
}

Tensor mul_scalar(const Tensor& x, double s) {
  Tensor out = unary(OpKind::mul_scalar, x, [s](double v) { return v * s; });
  out.node()->scalar = s;
  return out;
}

Tensor div_scalar(const Tensor& x, double s) {
  if (s == 0.0) throw ConfigError("div_scalar: division by zero");
  Tensor out = unary(OpKind::div_scalar, x, [s](double v) { return v / s; });
  out.node()->scalar = s;
  return out;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) shape_fail(OpKind::concat_rows, "no inputs");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Tensor& p : parts) {
    if (p.cols() != cols) {
      shape_fail(OpKind::concat_rows,
                 "column mismatch " + parts.front().shape().str() + " vs " + p.shape().str());
    }
    rows += p.rows();
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const Tensor& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return make_op(OpKind::concat_rows, std::vector<Tensor>(parts.begin(), parts.end()), {rows, cols},
                 std::move(out));
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  if (count == 0 || begin + count > x.rows()) {
    shape_fail(OpKind::slice_rows, "rows [" + std::to_string(begin) + ", " +
                                       std::to_string(begin + count) + ") of " + x.shape().str());
  }
  const std::size_t cols = x.cols();
  const auto v = x.values();
  std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(begin * cols),
                          v.begin() + static_cast<std::ptrdiff_t>((begin + count) * cols));
  Tensor t = make_op(OpKind::slice_rows, {x}, {count, cols}, std::move(out));
  t.node()->offset = begin;
  return t;
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices) {
  if (indices.empty()) shape_fail(OpKind::gather_rows, "empty index list");
  const std::size_t cols = x.cols();
  const auto v = x.values();
  std::vector<double> out;
  out.reserve(indices.size() * cols);
  for (std::size_t idx : indices) {
    if (idx >= x.rows()) {
      shape_fail(OpKind::gather_rows, "row " + std::to_string(idx) + " out of " + x.shape().str());
    }
    out.insert(out.end(), v.begin() + static_cast<std::ptrdiff_t>(idx * cols),
               v.begin() + static_cast<std::ptrdiff_t>((idx + 1) * cols));
  }
  Tensor t = make_op(OpKind::gather_rows, {x}, {indices.size(), cols}, std::move(out));
  t.node()->indices.assign(indices.begin(), indices.end());
  return t;
}

Tensor sigmoid_bce(const Tensor& logits, const Tensor& targets) {
  if (logits.shape() != targets.shape()) {
    shape_fail(OpKind::sigmoid_bce, logits.shape().str() + " vs " + targets.shape().str());
  }
  if (targets.requires_grad()) shape_fail(OpKind::sigmoid_bce, "targets must be constant");
  const auto z = logits.values();
  const auto y = targets.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    acc += std::max(z[i], 0.0) - z[i] * y[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  return make_op(OpKind::sigmoid_bce, {logits, targets}, {1, 1},
                 {acc / static_cast<double>(z.size())});
}

Tensor custom(std::span<const Tensor> inputs, Shape shape, std::vector<double> values,
              CustomVjp vjp) {
  if (values.size() != shape.size()) shape_fail(OpKind::custom, "value count mismatch");
  Tensor t = make_op(OpKind::custom, std::vector<Tensor>(inputs.begin(), inputs.end()), shape,
                     std::move(values));
  t.node()->vjp = std::move(vjp);
  return t;
}

// ---------------------------------------------------------------------------
// Backward

namespace {

double sigmoid_value(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

// Propagates node.grad into the grads of its inputs.
void propagate(Node& node) {
  const std::vector<double>& g = node.grad;
  auto input_grad = [&](std::size_t i) -> std::vector<double>* {
    Node& in = *node.inputs[i].node();
    if (!in.requires_grad) return nullptr;
    in.ensure_grad();
    return &in.grad;
  };
  auto elementwise = [&](auto&& dydx) {
    if (auto* gx = input_grad(0)) {
      const auto& x = node.inputs[0].node()->values;
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * dydx(x[i], node.values[i]);
    }
  };

  switch (node.op) {
    case OpKind::leaf:
      return;
    case OpKind::matmul: {
      const Node& a = *node.inputs[0].node();
      const Node& b = *node.inputs[1].node();
      const std::size_t n = a.shape.rows, k = a.shape.cols, m = b.shape.cols;
      if (auto* ga = input_grad(0)) {
        // dA = dC * B^T
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += g[i * m + j] * b.values[p * m + j];
            (*ga)[i * k + p] += acc;
          }
        }
      }
      if (auto* gb = input_grad(1)) {
        // dB = A^T * dC
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = a.values[i * k + p];
            double* brow = gb->data() + p * m;
            const double* grow = g.data() + i * m;
            for (std::size_t j = 0; j < m; ++j) brow[j] += aip * grow[j];
          }
        }
      }
      return;
    }
    case OpKind::add_broadcast:
    case OpKind::sub: {
      const double sign = node.op == OpKind::sub ? -1.0 : 1.0;
      if (auto* ga = input_grad(0)) {
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
      }
      if (auto* gb = input_grad(1)) {
        const std::size_t cols = node.shape.cols;
        const bool row_bcast = gb->size() != g.size();
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[row_bcast ? i % cols : i] += sign * g[i];
      }
      return;
    }
    case OpKind::relu:
      elementwise([](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
      return;
    case OpKind::leaky_relu: {
      const double slope = node.scalar;
      elementwise([slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
      return;
    }
    case OpKind::sigmoid:
      elementwise([](double, double y) { return y * (1.0 - y); });
      return;
    case OpKind::tanh:
      elementwise([](double, double y) { return 1.0 - y * y; });
      return;
    case OpKind::square:
      elementwise([](double x, double) { return 2.0 * x; });
      return;
    case OpKind::log:
      elementwise([](double x, double) { return 1.0 / x; });
      return;
    case OpKind::reciprocal:
      elementwise([](double x, double) { return -1.0 / (x * x); });
      return;
    case OpKind::max_with_scalar: {
      const double s = node.scalar;
      elementwise([s](double x, double) { return x > s ? 1.0 : 0.0; });
      return;
    }
    case OpKind::mul_scalar: {
      const double s = node.scalar;
      elementwise([s](double, double) { return s; });
      return;
    }
    case OpKind::div_scalar: {
      const double s = node.scalar;
      elementwise([s](double, double) { return 1.0 / s; });
      return;
    }
    case OpKind::sum:
    case OpKind::mean: {
      auto* gx = input_grad(0);
      if (!gx) return;
      const double scale = node.op == OpKind::mean ? 1.0 / node.scalar : 1.0;
      const Shape& in = node.inputs[0].node()->shape;
      for (std::size_t i = 0; i < in.rows; ++i) {
        for (std::size_t j = 0; j < in.cols; ++j) {
          double up = 0.0;
          switch (node.axis) {
            case Axis::all: up = g[0]; break;
            case Axis::rows: up = g[j]; break;
            case Axis::cols: up = g[i]; break;
          }
          (*gx)[i * in.cols + j] += scale * up;
        }
      }
      return;
    }
    case OpKind::concat_rows: {
      std::size_t offset = 0;
      for (std::size_t p = 0; p < node.inputs.size(); ++p) {
        const std::size_t len = node.inputs[p].size();
        if (auto* gp = input_grad(p)) {
          for (std::size_t i = 0; i < len; ++i) (*gp)[i] += g[offset + i];
        }
        offset += len;
      }
      return;
    }
    case OpKind::slice_rows: {
      if (auto* gx = input_grad(0)) {
        const std::size_t base = node.offset * node.shape.cols;
        for (std::size_t i = 0; i < g.size(); ++i) (*gx)[base + i] += g[i];
      }
      return;
    }
    case OpKind::gather_rows: {
      if (auto* gx = input_grad(0)) {
        const std::size_t cols = node.shape.cols;
        for (std::size_t r = 0; r < node.indices.size(); ++r) {
          for (std::size_t j = 0; j < cols; ++j) {
            (*gx)[node.indices[r] * cols + j] += g[r * cols + j];
          }
        }
      }
      return;
    }
    case OpKind::sigmoid_bce: {
      if (auto* gz = input_grad(0)) {
        const auto& z = node.inputs[0].node()->values;
        const auto& y = node.inputs[1].node()->values;
        const double scale = g[0] / static_cast<double>(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) (*gz)[i] += scale * (sigmoid_value(z[i]) - y[i]);
      }
      return;
    }
    case OpKind::custom: {
      const auto grads = node.vjp(g, node.inputs);
      for (std::size_t p = 0; p < node.inputs.size() && p < grads.size(); ++p) {
        if (grads[p].empty()) continue;
        if (auto* gp = input_grad(p)) {
          if (grads[p].size() != gp->size()) shape_fail(OpKind::custom, "vjp size mismatch");
          for (std::size_t i = 0; i < gp->size(); ++i) (*gp)[i] += grads[p][i];
        }
      }
      return;
    }
  }
}

}  // namespace

void backward(const Tensor& root) {
  if (!root.defined()) throw ConfigError("backward on undefined tensor");
  if (!root.shape().is_scalar()) {
    throw ShapeError("backward: root must be scalar, got " + root.shape().str());
  }
  if (!root.requires_grad()) throw ConfigError("backward: root does not require grad");

  // Iterative post-order DFS over the grad-requiring subgraph.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].node().get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (n->op != OpKind::leaf) n->grad.assign(n->values.size(), 0.0);
  }
  Node& r = *root.node();
  r.ensure_grad();
  r.grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) propagate(**it);
}

}  // namespace svddlab
