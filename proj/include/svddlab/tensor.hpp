#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. A Tensor is a cheap handle to a graph node; operations build the
// graph eagerly and backward() walks it in reverse topological order.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace svddlab {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool is_scalar() const { return rows == 1 && cols == 1; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

enum class OpKind {
  leaf,
  matmul,
  add_broadcast,
  sub,
  relu,
  leaky_relu,
  sigmoid,
  tanh,
  square,
  log,
  reciprocal,
  sum,
  mean,
  max_with_scalar,
  mul_scalar,
  div_scalar,
  concat_rows,
  slice_rows,
  gather_rows,
  sigmoid_bce,
  custom,
};

std::string_view op_name(OpKind kind);

/// Reduction direction for sum/mean.
enum class Axis {
  all,   // -> 1x1
  rows,  // reduce over rows -> 1 x cols
  cols,  // reduce over columns -> rows x 1
};

namespace detail {
struct Node;
}

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor row(std::vector<double> values, bool requires_grad = false);
  static Tensor column(std::vector<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rows() const { return shape().rows; }
  std::size_t cols() const { return shape().cols; }
  std::size_t size() const { return shape().size(); }

  std::span<const double> values() const;
  double at(std::size_t r, std::size_t c) const;
  /// Value of a 1x1 tensor.
  double item() const;

  bool requires_grad() const;
  bool is_leaf() const;
  OpKind op() const;

  /// Accumulated gradient; all zeros until backward() reaches this node.
  std::span<const double> grad() const;
  void zero_grad();

  /// Overwrites the values of a leaf. Only valid between graph constructions
  /// (e.g. optimizer steps); throws for non-leaf tensors.
  void assign(std::span<const double> values);

  /// New leaf holding a copy of the values, disconnected from the graph.
  Tensor detach(bool requires_grad = false) const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Forward operations. Each records a graph edge when any input requires grad
// and throws ShapeError naming the op on incompatible shapes.

Tensor matmul(const Tensor& a, const Tensor& b);
/// a + b where b has a's shape or is a 1 x a.cols row broadcast over rows.
Tensor add(const Tensor& a, const Tensor& b);
/// a - b with the same broadcasting rule as add().
Tensor sub(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.01);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor square(const Tensor& x);
/// Natural log; inputs must be > 0.
Tensor log(const Tensor& x);
Tensor reciprocal(const Tensor& x);
Tensor sum(const Tensor& x, Axis axis = Axis::all);
Tensor mean(const Tensor& x, Axis axis = Axis::all);
/// Element-wise max(x, s); max_with_scalar(x, 0) is the hinge max{0, x}.
Tensor max_with_scalar(const Tensor& x, double s);
Tensor mul_scalar(const Tensor& x, double s);
Tensor div_scalar(const Tensor& x, double s);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices);
/// Mean sigmoid cross-entropy between logits and constant {0,1} targets,
/// evaluated as max(z,0) - z*y + log(1+exp(-|z|)).
Tensor sigmoid_bce(const Tensor& logits, const Tensor& targets);

/// Vector-Jacobian product for a custom op: given the upstream gradient and
/// the inputs, returns one gradient buffer per input (empty to skip).
using CustomVjp = std::function<std::vector<std::vector<double>>(
    std::span<const double> upstream, std::span<const Tensor> inputs)>;

/// Op with caller-supplied forward values and backward rule.
Tensor custom(std::span<const Tensor> inputs, Shape shape, std::vector<double> values,
              CustomVjp vjp);

/// Accumulates d(root)/d(leaf) into every reachable leaf that requires grad.
/// root must be 1x1 and require grad.
void backward(const Tensor& root);

}  // namespace svddlab
