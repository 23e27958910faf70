#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace vrc {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

std::string to_string(const Shape& shape);
Index numel(const Shape& shape);

namespace detail {

using BackwardFn =
    std::function<void(const Eigen::VectorXd& grad_out, std::span<Eigen::VectorXd*> grad_in)>;

struct Node {
  Shape shape;
  Eigen::VectorXd value;
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::string kind;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
};

}  // namespace detail

/// Dense row-major array of doubles. A Tensor is a shared handle: copies alias
/// the same storage and the same tape node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor from(Shape shape, const Eigen::Ref<const Eigen::VectorXd>& values,
                     bool requires_grad = false);
  /// Rank-2 tensor holding a copy of `m`.
  static Tensor from_matrix(const Eigen::Ref<const RowMatrix>& m, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  Index rank() const { return static_cast<Index>(shape().size()); }
  Index dim(Index axis) const;
  Index size() const;

  const Eigen::VectorXd& values() const;
  /// Mutable access to leaf storage (parameters, gradcheck perturbation).
  Eigen::VectorXd& mutable_values();
  /// Row-major matrix view; rank-1 tensors view as a single row.
  Eigen::Map<const RowMatrix> matrix() const;
  double item() const;
  double operator[](Index flat) const { return values()[flat]; }

  bool requires_grad() const;
  /// Tape handle; only set on nodes recorded while gradients are enabled.
  std::uint64_t node_id() const;
  const std::string& kind() const;

  /// Leaf copy detached from the tape.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Records a primitive result. Inputs that do not require gradients are not
/// kept alive. When no input requires gradients the result is a constant.
Tensor make_result(std::string kind, Shape shape, Eigen::VectorXd value,
                   std::vector<Tensor> inputs, detail::BackwardFn backward);

/// Gradient recording switch, thread-local.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Counts primitives recorded on the current thread's tape.
struct Tape {
  static std::uint64_t recorded();
};

class Gradients {
 public:
  /// Gradient w.r.t. `t`, zeros when `t` is unreachable from the loss.
  Eigen::VectorXd of(const Tensor& t) const;
  bool reached(const Tensor& t) const;
  std::size_t size() const { return grads_.size(); }

 private:
  friend Gradients backward(const Tensor& loss);
  std::unordered_map<const detail::Node*, Eigen::VectorXd> grads_;
};

/// Reverse sweep from a scalar loss. Throws ShapeError for non-scalar losses.
Gradients backward(const Tensor& loss);

// ---- primitives -----------------------------------------------------------

/// Per-row affine map: x[N,Cin] * w[Cin,Cout] + b[Cout]. `b` may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b = {});
Tensor relu(const Tensor& x);
Tensor concat(const std::vector<Tensor>& parts, Index axis);
/// Selects slices along axis 0.
Tensor gather(const Tensor& x, std::span<const Index> indices);
Tensor softmax(const Tensor& x, Index axis);
Tensor log_softmax(const Tensor& x, Index axis);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);
Tensor mean_reduce(const Tensor& x, Index axis);
Tensor sum_reduce(const Tensor& x, Index axis);
/// Max along `axis`; ties route the gradient to the first maximum.
Tensor max_reduce(const Tensor& x, Index axis);
Tensor reshape(const Tensor& x, Shape shape);
/// Repeats the whole tensor `reps` times along `axis`.
Tensor tile(const Tensor& x, Index axis, Index reps);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
/// 1 / x; throws std::domain_error on a zero entry.
Tensor reciprocal(const Tensor& x);
/// Gradient passes where lo <= x <= hi.
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor slice(const Tensor& x, Index axis, Index begin, Index end);
/// Sum of all elements, shape [1].
Tensor sum(const Tensor& x);
/// Mean of all elements, shape [1].
Tensor mean(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& x) { return scale(x, s); }

}  // namespace vrc
