#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lgts {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
int shape_numel(const Shape& s);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool is_leaf = true;
  std::uint64_t id = 0;
  std::string name;  // set for parameters; empty otherwise
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const std::vector<double>& g)> backward;

  std::vector<double>& grad_buffer();
};

}  // namespace detail

// Dense tensor of doubles participating in a define-by-run reverse-mode
// graph. Copies are shallow; the node is shared. The graph is rebuilt on
// every forward pass and is confined to a single thread.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(std::vector<double> values, Shape shape);
  static Tensor scalar(double v);
  static Tensor zeros(Shape shape);
  static Tensor ones(Shape shape);
  // Leaf with requires_grad set; `name` shows up in optimizer and
  // grad-check diagnostics.
  static Tensor param(std::string name, std::vector<double> values, Shape shape);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int numel() const;
  int rank() const;
  // Scalar access; throws unless numel() == 1.
  double value() const;
  double at(int i) const;
  const std::vector<double>& values() const;
  std::vector<double>& mutable_values();

  bool requires_grad() const;
  bool is_leaf() const;
  const std::string& name() const;
  std::uint64_t id() const;

  const std::vector<double>& grad() const;  // zeros if never accumulated
  std::vector<double>& grad_buffer();
  void accumulate_grad(std::span<const double> g);
  void zero_grad();

  std::shared_ptr<detail::Node> node() const { return node_; }

 private:
  friend Tensor make_op(std::string, Shape, std::vector<double>,
                        const std::vector<Tensor>&,
                        std::function<void(const std::vector<double>&)>);
  std::shared_ptr<detail::Node> node_;
};

// Creates a graph node from precomputed forward values. `backward` receives
// the node's output gradient and must accumulate into the inputs via
// Tensor::accumulate_grad / grad_buffer. It is dropped when no input
// requires gradients.
Tensor make_op(std::string op_name, Shape out_shape, std::vector<double> out_values,
               const std::vector<Tensor>& inputs,
               std::function<void(const std::vector<double>& g)> backward);

// Elementwise binary ops with right-aligned broadcasting (equal dims, or
// one side 1/missing; gradients reduce over broadcast axes).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_const(const Tensor& a, double c);
Tensor mul_const(const Tensor& a, double c);
Tensor neg(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);  // rank-2 only

Tensor tanh(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
// Pass-through gradient inside (lo, hi), zero outside.
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor sum(const Tensor& a);   // scalar
Tensor mean(const Tensor& a);  // scalar

// Slice `len` entries starting at `start` along `axis`; rank 1 or 2.
Tensor slice(const Tensor& a, int axis, int start, int len);
// Concatenate along `axis`; rank 1 or 2. Zero-length parts are allowed.
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor reshape(const Tensor& a, Shape new_shape);

// Propagates d(out)/d(leaf) into every requires-grad leaf. `out` must be
// scalar. Interior gradients are reset per call; leaf gradients accumulate.
void backward(const Tensor& out);

}  // namespace lgts
