#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dsfl/error.hpp"

namespace dsfl {

using Shape = std::vector<int>;

int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major tensor of doubles. Immutable value type: every operation
/// allocates a fresh buffer, copies share the buffer. Images use NCHW.
///
/// A tensor may be grad-enabled, in which case any op consuming it under an
/// active Tape is recorded for reverse-mode differentiation. The id identifies
/// the value in gradient maps; copies keep the id.
class Tensor {
 public:
  Tensor() = default;  // undefined tensor, defined() == false

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor from_data(Shape shape, std::vector<double> data);
  /// Grad-enabled leaf (trainable parameter).
  static Tensor param(Shape shape, std::vector<double> data);

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_[static_cast<size_t>(axis)]; }
  int64_t size() const { return static_cast<int64_t>(data().size()); }
  const std::vector<double>& data() const;
  double at(int64_t flat_index) const { return data()[static_cast<size_t>(flat_index)]; }
  /// Value of a single-element tensor.
  double value() const;

  bool grad_enabled() const { return grad_enabled_; }
  uint64_t id() const { return id_; }

  /// Same buffer and id, different grad flag (used to freeze parameters).
  Tensor with_grad(bool enabled) const;
  /// Same buffer, fresh id, grad disabled.
  Tensor detached() const;

 private:
  std::shared_ptr<const std::vector<double>> data_;
  Shape shape_;
  uint64_t id_ = 0;
  bool grad_enabled_ = false;

  static uint64_t next_id();
};

/// Gradient map: tensor id -> gradient, same shape as the tensor's value.
using GradMap = std::unordered_map<uint64_t, Tensor>;

/// Per-op backward function. Receives dLoss/dOutput and returns one gradient
/// per recorded input (undefined Tensor for inputs that need no gradient).
using BackwardFn = std::function<std::vector<Tensor>(const Tensor& grad_out)>;

/// Reverse-mode tape. Constructing a Tape makes it the active tape for the
/// current thread; ops consuming grad-enabled tensors record themselves onto
/// it in topological order. One tape per forward pass; backward() consumes it.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  /// Gradients of a scalar loss w.r.t. every grad-enabled leaf seen by this
  /// tape. Leaves not reached by the loss get zero gradients. The tape is
  /// consumed; a second backward throws.
  GradMap backward(const Tensor& loss);

  size_t num_nodes() const { return nodes_.size(); }

  /// True if id is the output of a recorded op (i.e. carries history here).
  bool tracks(uint64_t id) const { return tracked_.count(id) > 0; }

  /// Used by ops: true if consuming this tensor must be recorded.
  bool wants(const Tensor& t) const { return t.grad_enabled() || tracks(t.id()); }

  void record(const Tensor& out, const std::vector<Tensor>& inputs, BackwardFn fn);

 private:
  struct Node {
    uint64_t out_id;
    std::vector<uint64_t> input_ids;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  std::unordered_set<uint64_t> tracked_;              // op outputs
  std::unordered_map<uint64_t, Shape> leaf_shapes_;   // grad-enabled leaves
  bool consumed_ = false;
  Tape* prev_ = nullptr;
};

// ---- elementwise ------------------------------------------------------------
// Binary ops require equal shapes or a single-element (scalar) operand on
// either side. Results never alias inputs. Non-finite outputs throw.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.2);
Tensor log(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

enum class EwOp { add, sub, mul, neg, abs, square, sigmoid, tanh, relu, leaky_relu, log, clamp };

/// Dispatch by op kind. `p1`/`p2` carry the leaky_relu slope or clamp bounds.
Tensor elementwise(EwOp op, const Tensor& a, const Tensor* b = nullptr,
                   double p1 = 0.2, double p2 = 0.0);

// ---- reductions --------------------------------------------------------------
// Empty axes list reduces over all axes to a [1] scalar. Reduced axes are
// dropped from the output shape.

Tensor sum(const Tensor& a, const std::vector<int>& axes = {});
Tensor mean(const Tensor& a, const std::vector<int>& axes = {});
Tensor l1_norm(const Tensor& a, const std::vector<int>& axes = {});
Tensor sq_l2_norm(const Tensor& a, const std::vector<int>& axes = {});

enum class ReduceOp { sum, mean, l1_norm, sq_l2_norm };

Tensor reduce(ReduceOp op, const Tensor& a, const std::vector<int>& axes = {});

// ---- structure ----------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape new_shape);
/// Contiguous slice [start, start+len) along one axis.
Tensor slice(const Tensor& a, int axis, int start, int len);
Tensor concat(const std::vector<Tensor>& parts, int axis);

/// Convenience: scalar-broadcast arithmetic with a constant.
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);

}  // namespace dsfl
