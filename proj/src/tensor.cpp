#include "vrc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace vrc {

namespace {

thread_local bool g_grad_enabled = true;
thread_local std::uint64_t g_next_id = 1;
thread_local std::uint64_t g_recorded = 0;

struct AxisSplit {
  Index outer = 1;
  Index n = 1;
  Index inner = 1;
};

Index normalize_axis(const std::string& op, const Shape& shape, Index axis) {
  const auto r = static_cast<Index>(shape.size());
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw ShapeError(op + ": axis " + std::to_string(axis) + " out of range for shape " +
                     to_string(shape));
  }
  return axis;
}

AxisSplit split_at(const Shape& shape, Index axis) {
  AxisSplit s;
  for (Index i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (Index i = axis + 1; i < static_cast<Index>(shape.size()); ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, Index axis) {
  Shape out;
  for (Index i = 0; i < static_cast<Index>(shape.size()); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

void require_same_shape(const std::string& op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(op + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

void require_rank(const std::string& op, const Tensor& t, Index rank) {
  if (t.rank() != rank) {
    throw ShapeError(op + ": expected rank " + std::to_string(rank) + ", got shape " +
                     to_string(t.shape()));
  }
}

void check_finite_shape(const Shape& shape) {
  for (Index d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + to_string(shape));
  }
}

template <typename F>
Tensor unary(std::string kind, const Tensor& x, F&& forward,
             std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&,
                                const Eigen::VectorXd&, Eigen::VectorXd&)>
                 grad) {
  Eigen::VectorXd y = forward(x.values());
  Tensor xin = x;
  auto yval = std::make_shared<Eigen::VectorXd>(y);
  return make_result(std::move(kind), x.shape(), std::move(y), {x},
                     [xin, yval, grad](const Eigen::VectorXd& g, std::span<Eigen::VectorXd*> gin) {
                       if (gin[0]) grad(g, xin.values(), *yval, *gin[0]);
                     });
}

}  // namespace

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Index numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

// ---- Tensor ---------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  check_finite_shape(shape);
  auto node = std::make_shared<detail::Node>();
  node->value = Eigen::VectorXd::Constant(numel(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  node->id = g_next_id++;
  node->kind = "leaf";
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return from(std::move(shape), Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                                   static_cast<Index>(values.size())),
              requires_grad);
}

Tensor Tensor::from(Shape shape, const Eigen::Ref<const Eigen::VectorXd>& values,
                    bool requires_grad) {
  check_finite_shape(shape);
  if (numel(shape) != values.size()) {
    throw ShapeError("Tensor::from: shape " + to_string(shape) + " needs " +
                     std::to_string(numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->value = values;
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  node->id = g_next_id++;
  node->kind = "leaf";
  return Tensor(std::move(node));
}

Tensor Tensor::from_matrix(const Eigen::Ref<const RowMatrix>& m, bool requires_grad) {
  Eigen::VectorXd flat(m.size());
  Eigen::Map<RowMatrix>(flat.data(), m.rows(), m.cols()) = m;
  return from({m.rows(), m.cols()}, flat, requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return full({1}, value, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw std::logic_error("use of undefined Tensor");
  return node_->shape;
}

Index Tensor::dim(Index axis) const {
  return shape()[normalize_axis("dim", shape(), axis)];
}

Index Tensor::size() const { return values().size(); }

const Eigen::VectorXd& Tensor::values() const {
  if (!node_) throw std::logic_error("use of undefined Tensor");
  return node_->value;
}

Eigen::VectorXd& Tensor::mutable_values() {
  if (!node_) throw std::logic_error("use of undefined Tensor");
  return node_->value;
}

Eigen::Map<const RowMatrix> Tensor::matrix() const {
  const auto& s = shape();
  if (s.size() == 1) return {values().data(), 1, s[0]};
  if (s.size() != 2) throw ShapeError("matrix view needs rank <= 2, got " + to_string(s));
  return {values().data(), s[0], s[1]};
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return values()[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
std::uint64_t Tensor::node_id() const { return node_ ? node_->id : 0; }
const std::string& Tensor::kind() const { return node_->kind; }

Tensor Tensor::detach() const { return from(shape(), values(), false); }

// ---- tape -----------------------------------------------------------------

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

std::uint64_t Tape::recorded() { return g_recorded; }

Tensor make_result(std::string kind, Shape shape, Eigen::VectorXd value,
                   std::vector<Tensor> inputs, detail::BackwardFn backward) {
  if (numel(shape) != value.size()) {
    throw ShapeError(kind + ": result shape " + to_string(shape) + " does not match " +
                     std::to_string(value.size()) + " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->kind = std::move(kind);
  node->id = g_next_id++;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.requires_grad(); });
  if (any && g_grad_enabled) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& t : inputs) node->inputs.push_back(t.requires_grad() ? t.node() : nullptr);
    node->backward = std::move(backward);
    ++g_recorded;
  }
  return Tensor(std::move(node));
}

Eigen::VectorXd Gradients::of(const Tensor& t) const {
  auto it = grads_.find(t.node().get());
  if (it == grads_.end()) return Eigen::VectorXd::Zero(t.size());
  return it->second;
}

bool Gradients::reached(const Tensor& t) const { return grads_.count(t.node().get()) > 0; }

Gradients backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + to_string(loss.shape()));
  }
  Gradients out;
  if (!loss.requires_grad()) return out;

  // Collect the reachable subgraph; ids increase in creation order, so sorting
  // by descending id is a valid reverse topological order.
  std::vector<detail::Node*> order;
  std::vector<detail::Node*> stack{loss.node().get()};
  std::unordered_map<const detail::Node*, bool> seen;
  while (!stack.empty()) {
    auto* n = stack.back();
    stack.pop_back();
    if (seen[n]) continue;
    seen[n] = true;
    order.push_back(n);
    for (const auto& in : n->inputs) {
      if (in && !seen[in.get()]) stack.push_back(in.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const detail::Node* a, const detail::Node* b) { return a->id > b->id; });

  auto& g = out.grads_;
  g[loss.node().get()] = Eigen::VectorXd::Ones(1);
  std::vector<Eigen::VectorXd*> gin;
  for (auto* n : order) {
    auto it = g.find(n);
    if (it == g.end() || !n->backward) continue;
    gin.assign(n->inputs.size(), nullptr);
    for (std::size_t i = 0; i < n->inputs.size(); ++i) {
      auto* in = n->inputs[i].get();
      if (!in) continue;
      auto [slot, inserted] = g.try_emplace(in);
      if (inserted) slot->second = Eigen::VectorXd::Zero(in->value.size());
      gin[i] = &slot->second;
    }
    // Element references survive rehashing; iterators do not.
    const Eigen::VectorXd& gout = g.at(n);
    n->backward(gout, gin);
  }
  return out;
}

// ---- primitives -----------------------------------------------------------

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank("linear", x, 2);
  require_rank("linear", w, 2);
  const Index n = x.dim(0), cin = x.dim(1), cout = w.dim(1);
  if (w.dim(0) != cin) {
    throw ShapeError("linear: input width " + std::to_string(cin) + " does not match weight " +
                     to_string(w.shape()));
  }
  if (b.defined() && (b.rank() != 1 || b.dim(0) != cout)) {
    throw ShapeError("linear: bias shape " + to_string(b.shape()) + " does not match width " +
                     std::to_string(cout));
  }
  Eigen::VectorXd y(n * cout);
  Eigen::Map<RowMatrix> ym(y.data(), n, cout);
  // Row by row so each output row depends only on its input row, bit for bit.
  const auto xm = x.matrix();
  const auto wm = w.matrix();
  for (Index i = 0; i < n; ++i) ym.row(i).noalias() = xm.row(i) * wm;
  if (b.defined()) ym.rowwise() += b.values().transpose();

  std::vector<Tensor> inputs{x, w};
  if (b.defined()) inputs.push_back(b);
  return make_result("linear", {n, cout}, std::move(y), inputs,
                     [x, w, n, cin, cout](const Eigen::VectorXd& g, std::span<Eigen::VectorXd*> gin) {
                       Eigen::Map<const RowMatrix> gm(g.data(), n, cout);
                       if (gin[0]) {
                         Eigen::Map<RowMatrix> gx(gin[0]->data(), n, cin);
                         const auto wt = w.matrix().transpose();
                         for (Index i = 0; i < n; ++i) gx.row(i).noalias() += gm.row(i) * wt;
                       }
                       if (gin[1]) {
                         Eigen::Map<RowMatrix>(gin[1]->data(), cin, cout).noalias() +=
                             x.matrix().transpose() * gm;
                       }
                       if (gin.size() > 2 && gin[2]) *gin[2] += gm.colwise().sum().transpose();
                     });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](const Eigen::VectorXd& v) -> Eigen::VectorXd { return v.cwiseMax(0.0); },
      [](const Eigen::VectorXd& g, const Eigen::VectorXd& xv, const Eigen::VectorXd&,
         Eigen::VectorXd& gi) { gi.array() += (xv.array() > 0.0).select(g.array(), 0.0); });
}

Tensor exp(const Tensor& x) {
  return unary(
      "exp", x, [](const Eigen::VectorXd& v) -> Eigen::VectorXd { return v.array().exp(); },
      [](const Eigen::VectorXd& g, const Eigen::VectorXd&, const Eigen::VectorXd& y,
         Eigen::VectorXd& gi) { gi.array() += g.array() * y.array(); });
}

Tensor log(const Tensor& x) {
  if ((x.values().array() <= 0.0).any()) {
    throw std::domain_error("log: non-positive input in tensor of shape " + to_string(x.shape()));
  }
  return unary(
      "log", x, [](const Eigen::VectorXd& v) -> Eigen::VectorXd { return v.array().log(); },
      [](const Eigen::VectorXd& g, const Eigen::VectorXd& xv, const Eigen::VectorXd&,
         Eigen::VectorXd& gi) { gi.array() += g.array() / xv.array(); });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lower bound exceeds upper bound");
  return unary(
      "clamp", x,
      [lo, hi](const Eigen::VectorXd& v) -> Eigen::VectorXd { return v.cwiseMax(lo).cwiseMin(hi); },
      [lo, hi](const Eigen::VectorXd& g, const Eigen::VectorXd& xv, const Eigen::VectorXd&,
               Eigen::VectorXd& gi) {
        gi.array() += (xv.array() >= lo && xv.array() <= hi).select(g.array(), 0.0);
      });
}

Tensor reciprocal(const Tensor& x) {
  if ((x.values().array() == 0.0).any()) throw std::domain_error("reciprocal: zero input");
  return unary(
      "reciprocal", x, [](const Eigen::VectorXd& v) -> Eigen::VectorXd { return v.cwiseInverse(); },
      [](const Eigen::VectorXd& g, const Eigen::VectorXd&, const Eigen::VectorXd& y,
         Eigen::VectorXd& gi) { gi.array() -= g.array() * y.array().square(); });
}

Tensor square(const Tensor& x) {
  return unary(
      "square", x, [](const Eigen::VectorXd& v) -> Eigen::VectorXd { return v.array().square(); },
      [](const Eigen::VectorXd& g, const Eigen::VectorXd& xv, const Eigen::VectorXd&,
         Eigen::VectorXd& gi) { gi.array() += 2.0 * g.array() * xv.array(); });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      "scale", x, [factor](const Eigen::VectorXd& v) -> Eigen::VectorXd { return v * factor; },
      [factor](const Eigen::VectorXd& g, const Eigen::VectorXd&, const Eigen::VectorXd&,
               Eigen::VectorXd& gi) { gi += factor * g; });
}

Tensor add_scalar(const Tensor& x, double offset) {
  return unary(
      "add_scalar", x,
      [offset](const Eigen::VectorXd& v) -> Eigen::VectorXd { return v.array() + offset; },
      [](const Eigen::VectorXd& g, const Eigen::VectorXd&, const Eigen::VectorXd&,
         Eigen::VectorXd& gi) { gi += g; });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  return make_result("add", a.shape(), a.values() + b.values(), {a, b},
                     [](const Eigen::VectorXd& g, std::span<Eigen::VectorXd*> gin) {
                       if (gin[0]) *gin[0] += g;
                       if (gin[1]) *gin[1] += g;
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  return make_result("sub", a.shape(), a.values() - b.values(), {a, b},
                     [](const Eigen::VectorXd& g, std::span<Eigen::VectorXd*> gin) {
                       if (gin[0]) *gin[0] += g;
                       if (gin[1]) *gin[1] -= g;
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  return make_result("mul", a.shape(), a.values().cwiseProduct(b.values()), {a, b},
                     [a, b](const Eigen::VectorXd& g, std::span<Eigen::VectorXd*> gin) {
                       if (gin[0]) *gin[0] += g.cwiseProduct(b.values());
                       if (gin[1]) *gin[1] += g.cwiseProduct(a.values());
                     });
}

Tensor concat(const std::vector<Tensor>& parts, Index axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  axis = normalize_axis("concat", first, axis);
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<Index> widths;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) {
      if (static_cast<Index>(i) != axis && s[i] != first[i]) ok = false;
    }
    if (!ok) {
      throw ShapeError("concat: shape " + to_string(s) + " incompatible with " +
                       to_string(first) + " along axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
    widths.push_back(s[axis]);
  }
  const AxisSplit sp = split_at(out_shape, axis);
  Eigen::VectorXd y(numel(out_shape));
  const Index out_row = sp.n * sp.inner;
  Index offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Index chunk = widths[k] * sp.inner;
    const auto& v = parts[k].values();
    for (Index o = 0; o < sp.outer; ++o) {
      y.segment(o * out_row + offset, chunk) = v.segment(o * chunk, chunk);
    }
    offset += chunk;
  }
  return make_result("concat", out_shape, std::move(y), parts,
                     [widths, sp, out_row](const Eigen::VectorXd& g, std::span<Eigen::VectorXd*> gin) {
                       Index off = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         const Index chunk = widths[k] * sp.inner;
                         if (gin[k]) {
                           for (Index o = 0; o < sp.outer; ++o) {
                             gin[k]->segment(o * chunk, chunk) += g.segment(o * out_row + off, chunk);
                           }
                         }
                         off += chunk;
                       }
                     });
}

Tensor gather(const Tensor& x, std::span<const Index> indices) {
  if (x.rank() < 1) throw ShapeError("gather: scalar input");
  const Index rows = x.dim(0);
  const Index inner = x.size() / std::max<Index>(rows, 1);
  for (Index i : indices) {
    if (i < 0 || i >= rows) {
      throw IndexError("gather: index " + std::to_string(i) + " out of range for " +
                       std::to_string(rows) + " rows");
    }
  }
  Shape out_shape = x.shape();
  out_shape[0] = static_cast<Index>(indices.size());
  Eigen::VectorXd y(numel(out_shape));
  const auto& v = x.values();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    y.segment(static_cast<Index>(r) * inner, inner) = v.segment(indices[r] * inner, inner);
  }
  std::vector<Index> idx(indices.begin(), indices.end());
  return make_result("gather", out_shape, std::move(y), {x},
                     [idx = std::move(idx), inner](const Eigen::VectorXd& g,
                                                   std::span<Eigen::VectorXd*> gin) {
                       if (!gin[0]) return;
                       for (std::size_t r = 0; r < idx.size(); ++r) {
                         gin[0]->segment(idx[r] * inner, inner) +=
                             g.segment(static_cast<Index>(r) * inner, inner);
                       }
                     });
}

namespace {

// Visits every (outer, inner) lane of an axis split with the flat offset of
// its first element; consecutive elements of a lane are `inner` apart.
template <typename F>
void for_each_lane(const AxisSplit& sp, F&& f) {
  for (Index o = 0; o < sp.outer; ++o) {
    for (Index i = 0; i < sp.inner; ++i) f(o * sp.n * sp.inner + i, o * sp.inner + i);
  }
}

}  // namespace

Tensor softmax(const Tensor& x, Index axis) {
  axis = normalize_axis("softmax", x.shape(), axis);
  const AxisSplit sp = split_at(x.shape(), axis);
  const auto& v = x.values();
  Eigen::VectorXd y(v.size());
  for_each_lane(sp, [&](Index base, Index) {
    double m = v[base];
    for (Index k = 1; k < sp.n; ++k) m = std::max(m, v[base + k * sp.inner]);
    double z = 0.0;
    for (Index k = 0; k < sp.n; ++k) {
      const double e = std::exp(v[base + k * sp.inner] - m);
      y[base + k * sp.inner] = e;
      z += e;
    }
    for (Index k = 0; k < sp.n; ++k) y[base + k * sp.inner] /= z;
  });
  auto yv = std::make_shared<Eigen::VectorXd>(y);
  return make_result("softmax", x.shape(), std::move(y), {x},
                     [yv, sp](const Eigen::VectorXd& g, std::span<Eigen::VectorXd*> gin) {
                       if (!gin[0]) return;
                       const auto& yy = *yv;
                       for_each_lane(sp, [&](Index base, Index) {
                         double dot = 0.0;
                         for (Index k = 0; k < sp.n; ++k) {
                           dot += g[base + k * sp.inner] * yy[base + k * sp.inner];
                         }
                         for (Index k = 0; k < sp.n; ++k) {
                           const Index at = base + k * sp.inner;
                           (*gin[0])[at] += yy[at] * (g[at] - dot);
                         }
                       });
                     });
}

Tensor log_softmax(const Tensor& x, Index axis) {
  axis = normalize_axis("log_softmax", x.shape(), axis);
  const AxisSplit sp = split_at(x.shape(), axis);
  const auto& v = x.values();
  Eigen::VectorXd y(v.size());
  for_each_lane(sp, [&](Index base, Index) {
    double m = v[base];
    for (Index k = 1; k < sp.n; ++k) m = std::max(m, v[base + k * sp.inner]);
    double z = 0.0;
    for (Index k = 0; k < sp.n; ++k) z += std::exp(v[base + k * sp.inner] - m);
    const double lse = m + std::log(z);
    for (Index k = 0; k < sp.n; ++k) y[base + k * sp.inner] = v[base + k * sp.inner] - lse;
  });
  auto yv = std::make_shared<Eigen::VectorXd>(y);
  return make_result("log_softmax", x.shape(), std::move(y), {x},
                     [yv, sp](const Eigen::VectorXd& g, std::span<Eigen::VectorXd*> gin) {
                       if (!gin[0]) return;
                       const auto& yy = *yv;
                       for_each_lane(sp, [&](Index base, Index) {
                         double gs = 0.0;
                         for (Index k = 0; k < sp.n; ++k) gs += g[base + k * sp.inner];
                         for (Index k = 0; k < sp.n; ++k) {
                           const Index at = base + k * sp.inner;
                           (*gin[0])[at] += g[at] - std::exp(yy[at]) * gs;
                         }
                       });
                     });
}

namespace {

// Sums in ascending value order, so the result does not depend on the order of
// elements along the axis.
double lane_sum(const Eigen::VectorXd& v, Index base, const AxisSplit& sp) {
  thread_local std::vector<double> buf;
  buf.resize(static_cast<std::size_t>(sp.n));
  for (Index k = 0; k < sp.n; ++k) buf[static_cast<std::size_t>(k)] = v[base + k * sp.inner];
  std::sort(buf.begin(), buf.end());
  double s = 0.0;
  for (double d : buf) s += d;
  return s;
}

}  // namespace

Tensor sum_reduce(const Tensor& x, Index axis) {
  axis = normalize_axis("sum_reduce", x.shape(), axis);
  const AxisSplit sp = split_at(x.shape(), axis);
  const auto& v = x.values();
  Eigen::VectorXd y = Eigen::VectorXd::Zero(sp.outer * sp.inner);
  for_each_lane(sp, [&](Index base, Index out) {
    y[out] = lane_sum(v, base, sp);
  });
  return make_result("sum_reduce", drop_axis(x.shape(), axis), std::move(y), {x},
                     [sp](const Eigen::VectorXd& g, std::span<Eigen::VectorXd*> gin) {
                       if (!gin[0]) return;
                       for_each_lane(sp, [&](Index base, Index out) {
                         for (Index k = 0; k < sp.n; ++k) (*gin[0])[base + k * sp.inner] += g[out];
                       });
                     });
}

Tensor mean_reduce(const Tensor& x, Index axis) {
  axis = normalize_axis("mean_reduce", x.shape(), axis);
  const Index n = x.shape()[axis];
  if (n == 0) throw ShapeError("mean_reduce: empty axis in shape " + to_string(x.shape()));
  const AxisSplit sp = split_at(x.shape(), axis);
  const auto& v = x.values();
  Eigen::VectorXd y(sp.outer * sp.inner);
  for_each_lane(sp, [&](Index base, Index out) {
    y[out] = lane_sum(v, base, sp) / static_cast<double>(n);
  });
  return make_result("mean_reduce", drop_axis(x.shape(), axis), std::move(y), {x},
                     [sp](const Eigen::VectorXd& g, std::span<Eigen::VectorXd*> gin) {
                       if (!gin[0]) return;
                       const double inv = 1.0 / static_cast<double>(sp.n);
                       for_each_lane(sp, [&](Index base, Index out) {
                         for (Index k = 0; k < sp.n; ++k) {
                           (*gin[0])[base + k * sp.inner] += g[out] * inv;
                         }
                       });
                     });
}

Tensor max_reduce(const Tensor& x, Index axis) {
  axis = normalize_axis("max_reduce", x.shape(), axis);
  if (x.shape()[axis] == 0) {
    throw ShapeError("max_reduce: empty axis in shape " + to_string(x.shape()));
  }
  const AxisSplit sp = split_at(x.shape(), axis);
  const auto& v = x.values();
  Eigen::VectorXd y(sp.outer * sp.inner);
  std::vector<Index> arg(static_cast<std::size_t>(sp.outer * sp.inner));
  for_each_lane(sp, [&](Index base, Index out) {
    Index best = base;
    for (Index k = 1; k < sp.n; ++k) {
      const Index at = base + k * sp.inner;
      if (v[at] > v[best]) best = at;
    }
    y[out] = v[best];
    arg[static_cast<std::size_t>(out)] = best;
  });
  return make_result("max_reduce", drop_axis(x.shape(), axis), std::move(y), {x},
                     [arg = std::move(arg)](const Eigen::VectorXd& g,
                                            std::span<Eigen::VectorXd*> gin) {
                       if (!gin[0]) return;
                       for (std::size_t o = 0; o < arg.size(); ++o) {
                         (*gin[0])[arg[o]] += g[static_cast<Index>(o)];
                       }
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  check_finite_shape(shape);
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  return make_result("reshape", std::move(shape), x.values(), {x},
                     [](const Eigen::VectorXd& g, std::span<Eigen::VectorXd*> gin) {
                       if (gin[0]) *gin[0] += g;
                     });
}

Tensor tile(const Tensor& x, Index axis, Index reps) {
  axis = normalize_axis("tile", x.shape(), axis);
  if (reps < 1) throw ShapeError("tile: reps must be >= 1, got " + std::to_string(reps));
  const AxisSplit sp = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] *= reps;
  const Index block = sp.n * sp.inner;
  const auto& v = x.values();
  Eigen::VectorXd y(numel(out_shape));
  for (Index o = 0; o < sp.outer; ++o) {
    for (Index r = 0; r < reps; ++r) {
      y.segment((o * reps + r) * block, block) = v.segment(o * block, block);
    }
  }
  return make_result("tile", out_shape, std::move(y), {x},
                     [sp, reps, block](const Eigen::VectorXd& g, std::span<Eigen::VectorXd*> gin) {
                       if (!gin[0]) return;
                       for (Index o = 0; o < sp.outer; ++o) {
                         for (Index r = 0; r < reps; ++r) {
                           gin[0]->segment(o * block, block) +=
                               g.segment((o * reps + r) * block, block);
                         }
                       }
                     });
}

Tensor slice(const Tensor& x, Index axis, Index begin, Index end) {
  axis = normalize_axis("slice", x.shape(), axis);
  const AxisSplit sp = split_at(x.shape(), axis);
  if (begin < 0 || end > sp.n || begin > end) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for axis of size " + std::to_string(sp.n));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const Index chunk = (end - begin) * sp.inner;
  const Index row = sp.n * sp.inner;
  const auto& v = x.values();
  Eigen::VectorXd y(numel(out_shape));
  for (Index o = 0; o < sp.outer; ++o) {
    y.segment(o * chunk, chunk) = v.segment(o * row + begin * sp.inner, chunk);
  }
  return make_result("slice", out_shape, std::move(y), {x},
                     [sp, begin, chunk, row](const Eigen::VectorXd& g,
                                             std::span<Eigen::VectorXd*> gin) {
                       if (!gin[0]) return;
                       for (Index o = 0; o < sp.outer; ++o) {
                         gin[0]->segment(o * row + begin * sp.inner, chunk) +=
                             g.segment(o * chunk, chunk);
                       }
                     });
}

Tensor sum(const Tensor& x) {
  Eigen::VectorXd y(1);
  y[0] = x.values().sum();
  return make_result("sum", {1}, std::move(y), {x},
                     [](const Eigen::VectorXd& g, std::span<Eigen::VectorXd*> gin) {
                       if (gin[0]) gin[0]->array() += g[0];
                     });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

}  // namespace vrc
