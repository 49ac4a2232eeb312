#pragma once

#include "wgcn/tensor.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace wgcn {

class Tape;

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows into it
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward;
  const Tape* tape = nullptr;
  std::size_t tape_index = 0;

  void accumulate(const Vector& g);
  Tensor& grad_buffer();
};

}  // namespace detail

// Handle to a value in the computation graph. Cheap to copy.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  Index dim(Index axis) const { return node_->value.dim(axis); }
  Index size() const { return node_->value.size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool valid() const { return static_cast<bool>(node_); }
  // Gradient accumulated by the last backward pass (zeros if none reached it).
  Tensor grad() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Leaf with no gradient.
Var constant(Tensor value);

// Ordered record of differentiable operations. Operations record onto the
// tape that is active on the calling thread; with no active tape they run
// without recording (inference mode).
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  [[nodiscard]] Scope activate() { return Scope(*this); }
  static Tape* active();

  // Accumulates d(loss)/d(leaf) into every reachable Parameter.
  void backward(const Var& loss);
  void clear();

  std::size_t size() const { return nodes_.size(); }
  const char* op_name(std::size_t i) const { return nodes_.at(i)->op; }
  // Tape indices visited by the last backward pass, in visit order.
  const std::vector<std::size_t>& last_visit_order() const { return visit_order_; }

  void record(const std::shared_ptr<detail::Node>& node);

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
  std::vector<std::size_t> visit_order_;
};

// Suspends recording on this thread for its lifetime.
class NoRecordScope {
 public:
  NoRecordScope();
  ~NoRecordScope();
  NoRecordScope(const NoRecordScope&) = delete;
  NoRecordScope& operator=(const NoRecordScope&) = delete;

 private:
  Tape* previous_;
};

// Trainable tensor with a persistent gradient. Copies are deep and receive a
// fresh id.
class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Tensor init);
  Parameter(const Parameter& other);
  Parameter& operator=(const Parameter& other);
  Parameter(Parameter&&) noexcept = default;
  Parameter& operator=(Parameter&&) noexcept = default;

  const std::string& name() const { return name_; }
  std::uint64_t id() const { return id_; }
  const Shape& shape() const { return node_->value.shape(); }

  const Tensor& value() const { return node_->value; }
  Tensor& value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& grad() { return node_->grad; }
  void zero_grad();

  Var var() const { return Var(node_); }

 private:
  std::string name_;
  std::uint64_t id_ = 0;
  std::shared_ptr<detail::Node> node_;
};

// --- operations ---------------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var reshape(const Var& x, Shape new_shape);
Var permute(const Var& x, const std::vector<Index>& axis_order);

// Equal shapes, or either operand holding exactly one element (broadcast).
Var add(const Var& x, const Var& y);
Var sub(const Var& x, const Var& y);
Var mul(const Var& x, const Var& y);
Var div(const Var& x, const Var& y);
Var scale(const Var& x, Scalar s);
Var add_scalar(const Var& x, Scalar s);
Var sub_scalar(const Var& x, Scalar s);
Var div_scalar(const Var& x, Scalar s);

Var relu(const Var& x);
Var square(const Var& x);
Var abs(const Var& x);
// max(x, floor) elementwise; gradient 0 where the floor is active.
Var clamp_min(const Var& x, Scalar floor);
// x^(-1/2) where x >= threshold, else 0 (zero-degree convention).
Var inv_sqrt_or_zero(const Var& x, Scalar threshold);
// u[m] (x) v[n] -> m x n
Var outer(const Var& u, const Var& v);

// Whole-tensor reductions return rank-0 tensors. min/max route the gradient
// to the first attaining element in row-major order.
Var reduce_sum(const Var& x);
Var reduce_mean(const Var& x);
Var reduce_min(const Var& x);
Var reduce_max(const Var& x);
// Sum over one axis; the axis is removed from the shape.
Var reduce_sum(const Var& x, Index axis);

// x[N x K] + b[K] on every row.
Var add_row_bias(const Var& x, const Var& b);

// Cross-correlation with zero padding and unit stride.
// x: N x C_in x H x W, w: C_out x C_in x kH x kW, bias: C_out.
struct Padding {
  Index h = 0;
  Index w = 0;
};
Var conv2d(const Var& x, const Var& w, const Var& bias, Padding pad = {});

enum class Mode { train, eval };

struct RunningStats {
  Tensor mean;
  Tensor var;
  bool initialized = false;
};

struct BatchNormOptions {
  Scalar epsilon = 1e-5;
  Scalar momentum = 0.1;
};

// Per-channel normalization over N, H, W. Train mode uses batch statistics
// (biased variance) and updates `stats`; eval mode reads `stats`.
Var batchnorm2d(const Var& x, const Var& scale, const Var& shift, RunningStats& stats, Mode mode,
                const BatchNormOptions& opts = {});
// Eval-only overload for const contexts.
Var batchnorm2d(const Var& x, const Var& scale, const Var& shift, const RunningStats& stats,
                const BatchNormOptions& opts = {});

}  // namespace wgcn
