#include "mmom/autodiff.h"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "mmom/errors.h"

namespace mmom::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

std::atomic<std::uint64_t> g_order{0};
thread_local bool t_grad_enabled = true;

ConstMap view(const Node& n) { return ConstMap(n.value.data(), n.rows, n.cols); }

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                   b.shape_string());
}

void require_axis(int axis, const char* op) {
  if (axis != 0 && axis != 1) throw ShapeError(std::string(op) + ": axis must be 0 or 1");
}

// Iteration over the lines of a matrix along `axis`: axis 1 walks each row,
// axis 0 walks each column.
struct Lines {
  std::size_t count, length, stride, step;
  std::size_t start(std::size_t line) const { return line * step; }
};

Lines lines_of(std::size_t rows, std::size_t cols, int axis) {
  if (axis == 1) return {rows, cols, 1, cols};
  return {cols, rows, cols, 1};
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

std::vector<double>& Node::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return from(rows, cols, std::vector<double>(rows * cols, 0.0), requires_grad);
}

Tensor Tensor::constant(std::size_t rows, std::size_t cols, double fill) {
  return from(rows, cols, std::vector<double>(rows * cols, fill));
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, std::vector<double> values,
                    bool requires_grad) {
  if (values.size() != rows * cols) {
    throw ShapeError("tensor of shape [" + std::to_string(rows) + ", " + std::to_string(cols) +
                     "] given " + std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<Node>();
  node->rows = rows;
  node->cols = cols;
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  node->order = g_order.fetch_add(1);
  return Tensor(std::move(node));
}

std::string Tensor::shape_string() const {
  return "[" + std::to_string(rows()) + ", " + std::to_string(cols()) + "]";
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_string());
  return node_->value[0];
}

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(size(), 0.0);
  return node_->grad;
}

Tensor Tensor::detach() const { return from(rows(), cols(), node_->value, false); }

Tensor Tensor::clone() const { return from(rows(), cols(), node_->value, node_->requires_grad); }

Tensor make_result(std::size_t rows, std::size_t cols, std::vector<double> values,
                   std::vector<Tensor> parents, std::function<void(Node&)> backward,
                   const char* op_name) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op_name) + " produced a non-finite value");
  }
  Tensor out = Tensor::from(rows, cols, std::move(values), false);
  bool needs = t_grad_enabled && std::any_of(parents.begin(), parents.end(),
                           [](const Tensor& p) { return p.requires_grad(); });
  if (needs) {
    out.node_->requires_grad = true;
    for (auto& p : parents) out.node_->parents.push_back(p.node_ptr());
    out.node_->backward = std::move(backward);
  }
  return out;
}

void backward(const Tensor& loss) {
  if (loss.size() != 1) throw ShapeError("backward needs a scalar loss, got " + loss.shape_string());
  if (!loss.requires_grad()) return;

  std::vector<std::shared_ptr<Node>> nodes;
  std::unordered_set<Node*> seen;
  std::vector<std::shared_ptr<Node>> stack{loss.node_ptr()};
  while (!stack.empty()) {
    auto n = std::move(stack.back());
    stack.pop_back();
    if (!seen.insert(n.get()).second) continue;
    for (const auto& p : n->parents) {
      if (p->requires_grad) stack.push_back(p);
    }
    nodes.push_back(std::move(n));
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const auto& a, const auto& b) { return a->order > b->order; });

  loss.node()->ensure_grad()[0] += 1.0;
  for (auto& n : nodes) {
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
  for (auto& n : nodes) {
    if (n->backward) {
      n->backward = nullptr;
      n->parents.clear();
      n->grad.clear();
    }
  }
}

// Products with a handful of rows (one sentence, a few frames) go row by row
// through matrix-vector kernels; Eigen's blocked GEMM spends most of its time
// packing at these shapes.
constexpr std::size_t kThinRows = 16;

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  std::vector<double> out(a.rows() * b.cols());
  MutMap result(out.data(), a.rows(), b.cols());
  if (a.rows() <= kThinRows) {
    // One pass over b: every row of b is read once and scattered into all rows.
    result.setZero();
    ConstMap av = view(*a.node()), bv = view(*b.node());
    for (std::size_t k = 0; k < a.cols(); ++k) {
      for (std::size_t i = 0; i < a.rows(); ++i) result.row(i) += av(i, k) * bv.row(k);
    }
  } else {
    result.noalias() = view(*a.node()) * view(*b.node());
  }
  return make_result(a.rows(), b.cols(), std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    ConstMap g(self.grad.data(), self.rows, self.cols);
    const bool thin = self.rows <= kThinRows;
    if (pa.requires_grad) {
      MutMap ga(pa.ensure_grad().data(), pa.rows, pa.cols);
      if (thin) {
        ConstMap bv = view(pb);
        for (std::size_t k = 0; k < pb.rows; ++k) {
          for (std::size_t i = 0; i < self.rows; ++i) ga(i, k) += g.row(i).dot(bv.row(k));
        }
      } else {
        ga.noalias() += g * view(pb).transpose();
      }
    }
    if (pb.requires_grad) {
      MutMap gb(pb.ensure_grad().data(), pb.rows, pb.cols);
      if (thin) {
        for (std::size_t i = 0; i < self.rows; ++i) gb.noalias() += view(pa).row(i).transpose() * g.row(i);
      } else {
        gb.noalias() += view(pa).transpose() * g;
      }
    }
  }, "matmul");
}

namespace {

template <typename Forward, typename GradA, typename GradB>
Tensor elementwise(const Tensor& a, const Tensor& b, const char* op, Forward f, GradA ga, GradB gb) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(op, a, b);
  std::vector<double> out(a.size());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i], bv[i]);
  return make_result(a.rows(), a.cols(), std::move(out), {a, b}, [ga, gb](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * ga(pa.value[i], pb.value[i]);
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * gb(pa.value[i], pb.value[i]);
    }
  }, op);
}

template <typename Forward, typename Derivative>
Tensor unary(const Tensor& a, const char* op, Forward f, Derivative d) {
  std::vector<double> out(a.size());
  auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i]);
  // The derivative is expressed through (input, output).
  return make_result(a.rows(), a.cols(), std::move(out), {a}, [d](Node& self) {
    Node& pa = *self.parents[0];
    auto& g = pa.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * d(pa.value[i], self.value[i]);
  }, op);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise(a, b, "add", [](double x, double y) { return x + y; },
                     [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise(a, b, "sub", [](double x, double y) { return x - y; },
                     [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise(a, b, "mul", [](double x, double y) { return x * y; },
                     [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, "scale", [factor](double x) { return x * factor; },
               [factor](double, double) { return factor; });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) shape_error("add_row", a, row);
  std::vector<double> out(a.values().begin(), a.values().end());
  auto rv = row.values();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) out[r * a.cols() + c] += rv[c];
  }
  return make_result(a.rows(), a.cols(), std::move(out), {a, row}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pr = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pr.requires_grad) {
      auto& g = pr.ensure_grad();
      for (std::size_t r = 0; r < self.rows; ++r) {
        for (std::size_t c = 0; c < self.cols; ++c) g[c] += self.grad[r * self.cols + c];
      }
    }
  }, "add_row");
}

Tensor pairwise_add(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) shape_error("pairwise_add", a, b);
  const std::size_t n = a.rows(), m = b.rows(), k = a.cols();
  std::vector<double> out(n * m * k);
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t c = 0; c < k; ++c) out[(i * m + j) * k + c] = av[i * k + c] + bv[j * k + c];
    }
  }
  return make_result(n * m, k, std::move(out), {a, b}, [n, m, k](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double* g = self.grad.data() + (i * m + j) * k;
        if (pa.requires_grad) {
          auto& ga = pa.ensure_grad();
          for (std::size_t c = 0; c < k; ++c) ga[i * k + c] += g[c];
        }
        if (pb.requires_grad) {
          auto& gb = pb.ensure_grad();
          for (std::size_t c = 0; c < k; ++c) gb[j * k + c] += g[c];
        }
      }
    }
  }, "pairwise_add");
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  require_axis(axis, "concat");
  if (parts.empty()) throw ShapeError("concat: no inputs");
  std::size_t rows = parts[0].rows(), cols = parts[0].cols();
  for (std::size_t p = 1; p < parts.size(); ++p) {
    if (axis == 1) {
      if (parts[p].rows() != rows) shape_error("concat(axis=1)", parts[0], parts[p]);
      cols += parts[p].cols();
    } else {
      if (parts[p].cols() != cols) shape_error("concat(axis=0)", parts[0], parts[p]);
      rows += parts[p].rows();
    }
  }
  std::vector<double> out(rows * cols);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& part : parts) {
    offsets.push_back(offset);
    auto v = part.values();
    for (std::size_t r = 0; r < part.rows(); ++r) {
      for (std::size_t c = 0; c < part.cols(); ++c) {
        std::size_t dst = axis == 1 ? r * cols + offset + c : (offset + r) * cols + c;
        out[dst] = v[r * part.cols() + c];
      }
    }
    offset += axis == 1 ? part.cols() : part.rows();
  }
  return make_result(rows, cols, std::move(out), parts, [axis, offsets](Node& self) {
    for (std::size_t p = 0; p < self.parents.size(); ++p) {
      Node& part = *self.parents[p];
      if (!part.requires_grad) continue;
      auto& g = part.ensure_grad();
      for (std::size_t r = 0; r < part.rows; ++r) {
        for (std::size_t c = 0; c < part.cols; ++c) {
          std::size_t src = axis == 1 ? r * self.cols + offsets[p] + c
                                      : (offsets[p] + r) * self.cols + c;
          g[r * part.cols + c] += self.grad[src];
        }
      }
    }
  }, "concat");
}

Tensor slice(const Tensor& a, int axis, std::size_t start, std::size_t length) {
  require_axis(axis, "slice");
  std::size_t extent = axis == 0 ? a.rows() : a.cols();
  if (length == 0 || start + length > extent) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") out of bounds for axis " + std::to_string(axis) + " of " + a.shape_string());
  }
  std::size_t rows = axis == 0 ? length : a.rows();
  std::size_t cols = axis == 1 ? length : a.cols();
  std::vector<double> out(rows * cols);
  auto v = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out[r * cols + c] = axis == 0 ? v[(start + r) * a.cols() + c] : v[r * a.cols() + start + c];
    }
  }
  return make_result(rows, cols, std::move(out), {a}, [axis, start](Node& self) {
    Node& pa = *self.parents[0];
    auto& g = pa.ensure_grad();
    for (std::size_t r = 0; r < self.rows; ++r) {
      for (std::size_t c = 0; c < self.cols; ++c) {
        std::size_t src = axis == 0 ? (start + r) * pa.cols + c : r * pa.cols + start + c;
        g[src] += self.grad[r * self.cols + c];
      }
    }
  }, "slice");
}

Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols) {
  if (rows * cols != a.size()) {
    throw ShapeError("reshape: cannot view " + a.shape_string() + " as [" + std::to_string(rows) +
                     ", " + std::to_string(cols) + "]");
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_result(rows, cols, std::move(out), {a}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  }, "reshape");
}

Tensor tanh(const Tensor& a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, "sigmoid",
               [](double x) {
                 if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
                 double e = std::exp(x);
                 return e / (1.0 + e);
               },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary(a, "relu", [](double x) { return x > 0 ? x : 0.0; },
               [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor softmax(const Tensor& a, int axis) {
  require_axis(axis, "softmax");
  Lines L = lines_of(a.rows(), a.cols(), axis);
  std::vector<double> out(a.size());
  auto v = a.values();
  for (std::size_t l = 0; l < L.count; ++l) {
    std::size_t s = L.start(l);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < L.length; ++k) mx = std::max(mx, v[s + k * L.stride]);
    double total = 0.0;
    for (std::size_t k = 0; k < L.length; ++k) {
      out[s + k * L.stride] = std::exp(v[s + k * L.stride] - mx);
      total += out[s + k * L.stride];
    }
    for (std::size_t k = 0; k < L.length; ++k) out[s + k * L.stride] /= total;
  }
  return make_result(a.rows(), a.cols(), std::move(out), {a}, [L](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t l = 0; l < L.count; ++l) {
      std::size_t s = L.start(l);
      double dot = 0.0;
      for (std::size_t k = 0; k < L.length; ++k) {
        dot += self.grad[s + k * L.stride] * self.value[s + k * L.stride];
      }
      for (std::size_t k = 0; k < L.length; ++k) {
        std::size_t i = s + k * L.stride;
        g[i] += self.value[i] * (self.grad[i] - dot);
      }
    }
  }, "softmax");
}

namespace {

double line_logsumexp(std::span<const double> v, std::size_t s, const Lines& L) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < L.length; ++k) mx = std::max(mx, v[s + k * L.stride]);
  if (!std::isfinite(mx)) return mx;
  double total = 0.0;
  for (std::size_t k = 0; k < L.length; ++k) total += std::exp(v[s + k * L.stride] - mx);
  return mx + std::log(total);
}

}  // namespace

Tensor log_softmax(const Tensor& a, int axis) {
  require_axis(axis, "log_softmax");
  Lines L = lines_of(a.rows(), a.cols(), axis);
  std::vector<double> out(a.size());
  auto v = a.values();
  for (std::size_t l = 0; l < L.count; ++l) {
    std::size_t s = L.start(l);
    double lse = line_logsumexp(v, s, L);
    for (std::size_t k = 0; k < L.length; ++k) out[s + k * L.stride] = v[s + k * L.stride] - lse;
  }
  return make_result(a.rows(), a.cols(), std::move(out), {a}, [L](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t l = 0; l < L.count; ++l) {
      std::size_t s = L.start(l);
      double total = 0.0;
      for (std::size_t k = 0; k < L.length; ++k) total += self.grad[s + k * L.stride];
      for (std::size_t k = 0; k < L.length; ++k) {
        std::size_t i = s + k * L.stride;
        g[i] += self.grad[i] - std::exp(self.value[i]) * total;
      }
    }
  }, "log_softmax");
}

Tensor logsumexp(const Tensor& a, int axis) {
  require_axis(axis, "logsumexp");
  Lines L = lines_of(a.rows(), a.cols(), axis);
  std::vector<double> out(L.count);
  auto v = a.values();
  for (std::size_t l = 0; l < L.count; ++l) out[l] = line_logsumexp(v, L.start(l), L);
  std::size_t rows = axis == 1 ? a.rows() : 1;
  std::size_t cols = axis == 1 ? 1 : a.cols();
  return make_result(rows, cols, std::move(out), {a}, [L](Node& self) {
    Node& pa = *self.parents[0];
    auto& g = pa.ensure_grad();
    for (std::size_t l = 0; l < L.count; ++l) {
      std::size_t s = L.start(l);
      for (std::size_t k = 0; k < L.length; ++k) {
        std::size_t i = s + k * L.stride;
        g[i] += self.grad[l] * std::exp(pa.value[i] - self.value[l]);
      }
    }
  }, "logsumexp");
}

Tensor mean_pool(const Tensor& a, int axis) {
  require_axis(axis, "mean_pool");
  Lines L = lines_of(a.rows(), a.cols(), axis);
  std::vector<double> out(L.count, 0.0);
  auto v = a.values();
  for (std::size_t l = 0; l < L.count; ++l) {
    std::size_t s = L.start(l);
    for (std::size_t k = 0; k < L.length; ++k) out[l] += v[s + k * L.stride];
    out[l] /= static_cast<double>(L.length);
  }
  std::size_t rows = axis == 1 ? a.rows() : 1;
  std::size_t cols = axis == 1 ? 1 : a.cols();
  return make_result(rows, cols, std::move(out), {a}, [L](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    double inv = 1.0 / static_cast<double>(L.length);
    for (std::size_t l = 0; l < L.count; ++l) {
      std::size_t s = L.start(l);
      for (std::size_t k = 0; k < L.length; ++k) g[s + k * L.stride] += self.grad[l] * inv;
    }
  }, "mean_pool");
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double x : a.values()) total += x;
  return make_result(1, 1, {total}, {a}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (auto& x : g) x += self.grad[0];
  }, "sum");
}

Tensor dropout(const Tensor& a, double p, bool train, std::mt19937_64& rng) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout probability must be in [0, 1)");
  if (!train || p == 0.0) return a;
  std::bernoulli_distribution keep(1.0 - p);
  const double factor = 1.0 / (1.0 - p);
  std::vector<double> mask(a.size());
  for (auto& m : mask) m = keep(rng) ? factor : 0.0;
  std::vector<double> out(a.size());
  auto v = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] * mask[i];
  return make_result(a.rows(), a.cols(), std::move(out), {a}, [mask](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
  }, "dropout");
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids) {
  const std::size_t d = table.cols();
  std::vector<double> out(ids.size() * d);
  auto v = table.values();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= table.rows()) {
      throw ShapeError("embedding_lookup: id " + std::to_string(ids[i]) + " outside table " +
                       table.shape_string());
    }
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(ids[i] * d), d, out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  return make_result(ids.size(), d, std::move(out), {table}, [rows, d](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t c = 0; c < d; ++c) g[rows[i] * d + c] += self.grad[i * d + c];
    }
  }, "embedding_lookup");
}

Tensor pick(const Tensor& a, const std::vector<std::pair<std::size_t, std::size_t>>& cells) {
  std::vector<double> out;
  out.reserve(cells.size());
  for (auto [r, c] : cells) {
    if (r >= a.rows() || c >= a.cols()) {
      throw ShapeError("pick: cell (" + std::to_string(r) + ", " + std::to_string(c) +
                       ") outside " + a.shape_string());
    }
    out.push_back(a.at(r, c));
  }
  if (out.empty()) throw ShapeError("pick: no cells");
  return make_result(cells.size(), 1, std::move(out), {a}, [cells](Node& self) {
    Node& pa = *self.parents[0];
    auto& g = pa.ensure_grad();
    for (std::size_t i = 0; i < cells.size(); ++i) {
      g[cells[i].first * pa.cols + cells[i].second] += self.grad[i];
    }
  }, "pick");
}

}  // namespace mmom::ad
