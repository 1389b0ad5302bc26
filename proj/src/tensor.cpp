#include "lgts/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "lgts/errors.hpp"

namespace lgts {

namespace {

std::atomic<std::uint64_t> g_next_node_id{1};

void check_shape(const Shape& s, const char* where) {
  for (int d : s) {
    if (d < 0) throw ValidationError(std::string(where) + ": negative dim in shape " + shape_str(s));
  }
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

int shape_numel(const Shape& s) {
  int n = 1;
  for (int d : s) n *= d;
  return n;
}

namespace detail {

std::vector<double>& Node::grad_buffer() {
  if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  return grad;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tensor

static std::shared_ptr<detail::Node> new_node(Shape shape, std::vector<double> values) {
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->id = g_next_node_id.fetch_add(1, std::memory_order_relaxed);
  return n;
}

Tensor Tensor::constant(std::vector<double> values, Shape shape) {
  check_shape(shape, "constant");
  if (static_cast<int>(values.size()) != shape_numel(shape)) {
    throw ValidationError("constant: " + std::to_string(values.size()) +
                          " values for shape " + shape_str(shape));
  }
  Tensor t;
  t.node_ = new_node(std::move(shape), std::move(values));
  return t;
}

Tensor Tensor::scalar(double v) { return constant({v}, {1}); }

Tensor Tensor::zeros(Shape shape) {
  check_shape(shape, "zeros");
  return constant(std::vector<double>(shape_numel(shape), 0.0), std::move(shape));
}

Tensor Tensor::ones(Shape shape) {
  check_shape(shape, "ones");
  return constant(std::vector<double>(shape_numel(shape), 1.0), std::move(shape));
}

Tensor Tensor::param(std::string name, std::vector<double> values, Shape shape) {
  Tensor t = constant(std::move(values), std::move(shape));
  t.node_->requires_grad = true;
  t.node_->name = std::move(name);
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }
int Tensor::numel() const { return static_cast<int>(node_->values.size()); }
int Tensor::rank() const { return static_cast<int>(node_->shape.size()); }

double Tensor::value() const {
  if (numel() != 1) throw ValidationError("value(): tensor has shape " + shape_str(shape()));
  return node_->values[0];
}

double Tensor::at(int i) const { return node_->values.at(i); }
const std::vector<double>& Tensor::values() const { return node_->values; }
std::vector<double>& Tensor::mutable_values() { return node_->values; }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_->is_leaf; }
const std::string& Tensor::name() const { return node_->name; }
std::uint64_t Tensor::id() const { return node_->id; }

const std::vector<double>& Tensor::grad() const {
  static const std::vector<double> kEmpty;
  if (node_->grad.empty() && !node_->values.empty()) {
    // Never accumulated: expose zeros lazily.
    node_->grad.assign(node_->values.size(), 0.0);
  }
  return node_->grad.empty() ? kEmpty : node_->grad;
}

std::vector<double>& Tensor::grad_buffer() { return node_->grad_buffer(); }

void Tensor::accumulate_grad(std::span<const double> g) {
  auto& buf = node_->grad_buffer();
  if (g.size() != buf.size()) {
    throw ValidationError("accumulate_grad: size mismatch on " + shape_str(shape()));
  }
  for (size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor make_op(std::string op_name, Shape out_shape, std::vector<double> out_values,
               const std::vector<Tensor>& inputs,
               std::function<void(const std::vector<double>& g)> backward) {
  if (static_cast<int>(out_values.size()) != shape_numel(out_shape)) {
    throw ValidationError(op_name + ": produced " + std::to_string(out_values.size()) +
                          " values for shape " + shape_str(out_shape));
  }
  Tensor t;
  t.node_ = new_node(std::move(out_shape), std::move(out_values));
  t.node_->is_leaf = false;
  t.node_->name = std::move(op_name);
  bool needs = false;
  for (const auto& in : inputs) {
    if (in.requires_grad()) {
      needs = true;
      t.node_->parents.push_back(in.node());
    }
  }
  t.node_->requires_grad = needs;
  if (needs) t.node_->backward = std::move(backward);
  return t;
}

// ---------------------------------------------------------------------------
// Broadcasting helpers

namespace {

struct BcPlan {
  Shape out;
  // Per output dim, the stride into each operand (0 on broadcast dims).
  std::vector<int> stride_a, stride_b, stride_out;
};

BcPlan plan_broadcast(const Tensor& a, const Tensor& b, const char* op) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  int ra = static_cast<int>(sa.size()), rb = static_cast<int>(sb.size());
  int r = std::max(ra, rb);
  BcPlan p;
  p.out.resize(r);
  for (int i = 0; i < r; ++i) {
    int da = i < r - ra ? 1 : sa[i - (r - ra)];
    int db = i < r - rb ? 1 : sb[i - (r - rb)];
    if (da == db || da == 1 || db == 1) {
      p.out[i] = std::max(da, db);
    } else {
      throw ValidationError(std::string(op) + ": shape mismatch " + shape_str(sa) +
                            " vs " + shape_str(sb));
    }
  }
  auto strides_of = [&](const Shape& s) {
    std::vector<int> st(r, 0);
    int run = 1;
    int rs = static_cast<int>(s.size());
    for (int i = rs - 1; i >= 0; --i) {
      int out_i = i + (r - rs);
      st[out_i] = (s[i] == 1 && p.out[out_i] != 1) ? 0 : run;
      run *= s[i];
    }
    return st;
  };
  p.stride_a = strides_of(sa);
  p.stride_b = strides_of(sb);
  p.stride_out.assign(r, 0);
  int run = 1;
  for (int i = r - 1; i >= 0; --i) {
    p.stride_out[i] = run;
    run *= p.out[i];
  }
  return p;
}

// Walks every output element, handing (out_idx, a_idx, b_idx) to fn.
template <class F>
void for_broadcast(const BcPlan& p, F&& fn) {
  int n = shape_numel(p.out);
  int r = static_cast<int>(p.out.size());
  for (int i = 0; i < n; ++i) {
    int rem = i, ia = 0, ib = 0;
    for (int k = 0; k < r; ++k) {
      int c = rem / p.stride_out[k];
      rem -= c * p.stride_out[k];
      ia += c * p.stride_a[k];
      ib += c * p.stride_b[k];
    }
    fn(i, ia, ib);
  }
}

using Fn2 = double (*)(double, double);

Tensor ew_binary(const char* name, const Tensor& a, const Tensor& b, Fn2 f, Fn2 dfda, Fn2 dfdb) {
  BcPlan p = plan_broadcast(a, b, name);
  std::vector<double> out(shape_numel(p.out));
  const auto& va = a.values();
  const auto& vb = b.values();
  for_broadcast(p, [&](int i, int ia, int ib) { out[i] = f(va[ia], vb[ib]); });
  Tensor ta = a, tb = b;
  return make_op(name, p.out, std::move(out), {a, b},
                 [p, ta, tb, dfda, dfdb](const std::vector<double>& g) mutable {
                   const auto& va = ta.values();
                   const auto& vb = tb.values();
                   if (ta.requires_grad()) {
                     auto& ga = ta.grad_buffer();
                     for_broadcast(p, [&](int i, int ia, int ib) {
                       ga[ia] += g[i] * dfda(va[ia], vb[ib]);
                     });
                   }
                   if (tb.requires_grad()) {
                     auto& gb = tb.grad_buffer();
                     for_broadcast(p, [&](int i, int ia, int ib) {
                       gb[ib] += g[i] * dfdb(va[ia], vb[ib]);
                     });
                   }
                 });
}

template <class F, class DF>
Tensor ew_unary(const char* name, const Tensor& a, F f, DF dfdx) {
  std::vector<double> out(a.numel());
  const auto& va = a.values();
  for (int i = 0; i < a.numel(); ++i) out[i] = f(va[i]);
  Tensor ta = a;
  return make_op(name, a.shape(), std::move(out), {a},
                 [ta, dfdx](const std::vector<double>& g) mutable {
                   if (!ta.requires_grad()) return;
                   auto& ga = ta.grad_buffer();
                   const auto& va = ta.values();
                   for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx(va[i]);
                 });
}

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

// ---------------------------------------------------------------------------
// Ops

Tensor add(const Tensor& a, const Tensor& b) {
  return ew_binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return ew_binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return ew_binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return ew_binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor add_const(const Tensor& a, double c) {
  return ew_unary(
      "add_const", a, [c](double x) { return x + c; }, [](double) { return 1.0; });
}

Tensor mul_const(const Tensor& a, double c) {
  return ew_unary(
      "mul_const", a, [c](double x) { return x * c; }, [c](double) { return c; });
}

Tensor neg(const Tensor& a) { return mul_const(a, -1.0); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ValidationError("matmul: expects rank-2 operands, got " + shape_str(a.shape()) +
                          " and " + shape_str(b.shape()));
  }
  int m = a.shape()[0], k = a.shape()[1];
  int k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2) {
    throw ValidationError("matmul: inner dims differ, " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
  }
  std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
  const auto& va = a.values();
  const auto& vb = b.values();
  for (int i = 0; i < m; ++i) {
    for (int l = 0; l < k; ++l) {
      double ail = va[i * k + l];
      if (ail == 0.0) continue;
      const double* brow = vb.data() + static_cast<size_t>(l) * n;
      double* orow = out.data() + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += ail * brow[j];
    }
  }
  Tensor ta = a, tb = b;
  return make_op("matmul", {m, n}, std::move(out), {a, b},
                 [ta, tb, m, k, n](const std::vector<double>& g) mutable {
                   const auto& va = ta.values();
                   const auto& vb = tb.values();
                   if (ta.requires_grad()) {
                     auto& ga = ta.grad_buffer();
                     // dA = G * B^T
                     for (int i = 0; i < m; ++i)
                       for (int l = 0; l < k; ++l) {
                         double s = 0.0;
                         for (int j = 0; j < n; ++j) s += g[i * n + j] * vb[l * n + j];
                         ga[i * k + l] += s;
                       }
                   }
                   if (tb.requires_grad()) {
                     auto& gb = tb.grad_buffer();
                     // dB = A^T * G
                     for (int l = 0; l < k; ++l)
                       for (int j = 0; j < n; ++j) {
                         double s = 0.0;
                         for (int i = 0; i < m; ++i) s += va[i * k + l] * g[i * n + j];
                         gb[l * n + j] += s;
                       }
                   }
                 });
}

Tensor tanh(const Tensor& a) {
  return ew_unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double x) {
        double t = std::tanh(x);
        return 1.0 - t * t;
      });
}

Tensor softplus(const Tensor& a) {
  return ew_unary(
      "softplus", a,
      [](double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x) { return sigmoid(x); });
}

Tensor exp(const Tensor& a) {
  return ew_unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Tensor log(const Tensor& a) {
  return ew_unary(
      "log", a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Tensor square(const Tensor& a) {
  return ew_unary(
      "square", a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (lo > hi) throw ValidationError("clamp: lo > hi");
  return ew_unary(
      "clamp", a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  Tensor ta = a;
  return make_op("sum", {1}, {s}, {a}, [ta](const std::vector<double>& g) mutable {
    if (!ta.requires_grad()) return;
    auto& ga = ta.grad_buffer();
    for (auto& gi : ga) gi += g[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ValidationError("mean: empty tensor");
  double s = 0.0;
  for (double v : a.values()) s += v;
  double inv = 1.0 / a.numel();
  Tensor ta = a;
  return make_op("mean", {1}, {s * inv}, {a}, [ta, inv](const std::vector<double>& g) mutable {
    if (!ta.requires_grad()) return;
    auto& ga = ta.grad_buffer();
    for (auto& gi : ga) gi += g[0] * inv;
  });
}

Tensor slice(const Tensor& a, int axis, int start, int len) {
  if (a.rank() < 1 || a.rank() > 2) {
    throw ValidationError("slice: rank " + std::to_string(a.rank()) + " unsupported");
  }
  if (axis < 0 || axis >= a.rank()) throw ValidationError("slice: bad axis");
  int dim = a.shape()[axis];
  if (len < 0 || start < 0 || start + len > dim) {
    throw ValidationError("slice: range [" + std::to_string(start) + "," +
                          std::to_string(start + len) + ") out of bounds for dim " +
                          std::to_string(dim));
  }
  Shape out_shape = a.shape();
  out_shape[axis] = len;
  int rows = a.rank() == 2 ? a.shape()[0] : 1;
  int cols = a.rank() == 2 ? a.shape()[1] : a.shape()[0];
  // Normalize to 2-D (rows x cols); vectors live on the single axis.
  int r0 = 0, c0 = 0, rn = rows, cn = cols;
  if (a.rank() == 1) {
    c0 = start, cn = len;
  } else if (axis == 0) {
    r0 = start, rn = len;
  } else {
    c0 = start, cn = len;
  }
  std::vector<double> out(static_cast<size_t>(rn) * cn);
  const auto& va = a.values();
  for (int i = 0; i < rn; ++i)
    for (int j = 0; j < cn; ++j) out[i * cn + j] = va[(r0 + i) * cols + (c0 + j)];
  Tensor ta = a;
  return make_op("slice", out_shape, std::move(out), {a},
                 [ta, r0, c0, rn, cn, cols](const std::vector<double>& g) mutable {
                   if (!ta.requires_grad()) return;
                   auto& ga = ta.grad_buffer();
                   for (int i = 0; i < rn; ++i)
                     for (int j = 0; j < cn; ++j)
                       ga[(r0 + i) * cols + (c0 + j)] += g[i * cn + j];
                 });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ValidationError("concat: no parts");
  int r = parts[0].rank();
  if (r < 1 || r > 2) throw ValidationError("concat: rank unsupported");
  if (axis < 0 || axis >= r) throw ValidationError("concat: bad axis");
  Shape out_shape = parts[0].shape();
  int along = 0;
  for (const auto& p : parts) {
    if (p.rank() != r) throw ValidationError("concat: mixed ranks");
    for (int d = 0; d < r; ++d) {
      if (d == axis) continue;
      if (p.shape()[d] != out_shape[d]) {
        throw ValidationError("concat: shape mismatch " + shape_str(p.shape()) + " vs " +
                              shape_str(out_shape));
      }
    }
    along += p.shape()[axis];
  }
  out_shape[axis] = along;

  int orows = r == 2 ? out_shape[0] : 1;
  int ocols = r == 2 ? out_shape[1] : out_shape[0];
  std::vector<double> out(static_cast<size_t>(orows) * ocols);
  // Offsets of each part along the concat axis.
  std::vector<int> offs(parts.size());
  int run = 0;
  for (size_t k = 0; k < parts.size(); ++k) {
    offs[k] = run;
    run += parts[k].shape()[axis];
  }
  for (size_t k = 0; k < parts.size(); ++k) {
    const auto& vp = parts[k].values();
    int prows = r == 2 ? parts[k].shape()[0] : 1;
    int pcols = r == 2 ? parts[k].shape()[1] : parts[k].shape()[0];
    int ro = (r == 2 && axis == 0) ? offs[k] : 0;
    int co = (r == 1 || axis == 1) ? offs[k] : 0;
    for (int i = 0; i < prows; ++i)
      for (int j = 0; j < pcols; ++j) out[(ro + i) * ocols + (co + j)] = vp[i * pcols + j];
  }
  std::vector<Tensor> owned = parts;
  return make_op("concat", out_shape, std::move(out), parts,
                 [owned, r, axis, offs, ocols](const std::vector<double>& g) mutable {
                   for (size_t k = 0; k < owned.size(); ++k) {
                     if (!owned[k].requires_grad()) continue;
                     auto& gp = owned[k].grad_buffer();
                     int prows = r == 2 ? owned[k].shape()[0] : 1;
                     int pcols = r == 2 ? owned[k].shape()[1] : owned[k].shape()[0];
                     int ro = (r == 2 && axis == 0) ? offs[k] : 0;
                     int co = (r == 1 || axis == 1) ? offs[k] : 0;
                     for (int i = 0; i < prows; ++i)
                       for (int j = 0; j < pcols; ++j)
                         gp[i * pcols + j] += g[(ro + i) * ocols + (co + j)];
                   }
                 });
}

Tensor reshape(const Tensor& a, Shape new_shape) {
  check_shape(new_shape, "reshape");
  if (shape_numel(new_shape) != a.numel()) {
    throw ValidationError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                          shape_str(new_shape));
  }
  Tensor ta = a;
  return make_op("reshape", std::move(new_shape), a.values(), {a},
                 [ta](const std::vector<double>& g) mutable {
                   if (ta.requires_grad()) ta.accumulate_grad(g);
                 });
}

// ---------------------------------------------------------------------------
// Backward pass

void backward(const Tensor& out) {
  if (!out.defined()) throw ValidationError("backward: undefined tensor");
  if (out.numel() != 1) {
    throw ValidationError("backward: output must be scalar, got shape " + shape_str(out.shape()));
  }
  if (!out.requires_grad()) return;  // nothing reachable

  // Post-order DFS over the requires-grad subgraph (iterative).
  std::vector<detail::Node*> topo;
  std::unordered_set<detail::Node*> seen;
  struct Frame {
    detail::Node* n;
    size_t next = 0;
  };
  std::vector<Frame> stack;
  stack.push_back({out.node().get()});
  seen.insert(out.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.n->parents.size()) {
      detail::Node* p = f.n->parents[f.next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p});
      }
    } else {
      topo.push_back(f.n);
      stack.pop_back();
    }
  }

  // Interior gradients are per-call scratch; leaf gradients accumulate.
  for (detail::Node* n : topo) {
    if (!n->is_leaf) {
      auto& g = n->grad_buffer();
      std::fill(g.begin(), g.end(), 0.0);
    }
  }
  out.node()->grad_buffer()[0] += 1.0;

  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward) n->backward(n->grad);
  }
}

}  // namespace lgts
