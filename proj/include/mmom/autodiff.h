#pragma once

// Minimal reverse-mode differentiation over dense row-major matrices of
// doubles. Every tensor is two-dimensional (rows x cols); a scalar is 1x1.
// Shapes are never broadcast: bias rows are added with add_row, pairwise sums
// with pairwise_add.
//
// Operations record their parents and a backward rule when any input
// requires a gradient. backward() walks the recorded nodes reachable from the
// loss in reverse creation order, accumulates into leaf gradients, and then
// drops the recorded graph.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace mmom::ad {

struct Node {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient reaches the node
  bool requires_grad = false;
  std::uint64_t order = 0;   // creation order, used to sequence backward
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad();
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
  static Tensor constant(std::size_t rows, std::size_t cols, double fill);
  static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double v) { return from(1, 1, {v}); }

  bool defined() const { return node_ != nullptr; }
  std::size_t rows() const { return node_->rows; }
  std::size_t cols() const { return node_->cols; }
  std::size_t size() const { return node_->value.size(); }
  std::vector<std::size_t> shape() const { return {rows(), cols()}; }
  std::string shape_string() const;

  std::span<const double> values() const { return node_->value; }
  // Direct write access for optimizers and initialization; not recorded.
  std::span<double> mutable_values() { return node_->value; }
  double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Zero-filled view if no gradient has arrived yet.
  std::vector<double> grad() const;
  void zero_grad() { node_->grad.clear(); }

  // Same values, no history; the copy never requires a gradient.
  Tensor detach() const;
  // Deep copy of values, keeping requires_grad for leaves.
  Tensor clone() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  friend Tensor make_result(std::size_t, std::size_t, std::vector<double>,
                            std::vector<Tensor>, std::function<void(Node&)>, const char*);
  std::shared_ptr<Node> node_;
};

// Builds an op result. `backward` is kept only when some parent requires a
// gradient; it must add the node's gradient contribution into the parents.
// Throws NumericError if `values` contains NaN or Inf.
Tensor make_result(std::size_t rows, std::size_t cols, std::vector<double> values,
                   std::vector<Tensor> parents, std::function<void(Node&)> backward,
                   const char* op_name);

// While alive, ops on this thread record no graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Populates gradients of every requires_grad tensor reachable from `loss`
// (must be 1x1), then clears the recorded graph.
void backward(const Tensor& loss);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// a[m,n] + row[1,n] added to every row.
Tensor add_row(const Tensor& a, const Tensor& row);
// Row i*m + j of the result is a_i + b_j, for a[n,k], b[m,k].
Tensor pairwise_add(const Tensor& a, const Tensor& b);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, std::size_t start, std::size_t length);
Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);

// Reductions over `axis` keep the other dimension: axis 1 gives [rows, 1],
// axis 0 gives [1, cols].
Tensor softmax(const Tensor& a, int axis);
Tensor log_softmax(const Tensor& a, int axis);
Tensor logsumexp(const Tensor& a, int axis);
Tensor mean_pool(const Tensor& a, int axis);
Tensor sum(const Tensor& a);

// Inverted dropout: identity when !train, else zeroes with probability p and
// scales survivors by 1 / (1 - p).
Tensor dropout(const Tensor& a, double p, bool train, std::mt19937_64& rng);

// Rows of table[V, d] selected by ids -> [ids.size(), d].
Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids);

// Elements a[r, c] for each (r, c) pair -> [pairs.size(), 1].
Tensor pick(const Tensor& a, const std::vector<std::pair<std::size_t, std::size_t>>& cells);

}  // namespace mmom::ad
