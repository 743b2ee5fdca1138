#include "scr/autograd.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace scr::ag {

namespace {

thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_clamped{0};

constexpr double kProbFloor = 1e-12;

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

void note_clamp(std::uint64_t n) {
  if (n == 0) return;
  const auto before = g_clamped.fetch_add(n);
  if (before == 0 || (before / 1000) != ((before + n) / 1000)) {
    spdlog::warn("log-probability clamped at {} ({} lookups so far)", kProbFloor, before + n);
  }
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

double Var::item() const {
  if (rows() != 1 || cols() != 1) throw std::logic_error("item() on non-scalar");
  return node_->value(0, 0);
}

void Var::zero_grad() {
  if (node_) node_->grad.resize(0, 0);
}

Var constant(Matrix value) { return Var(std::move(value), false); }

Var scalar(double value) {
  Matrix m(1, 1);
  m(0, 0) = value;
  return constant(std::move(m));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

std::uint64_t clamped_log_count() { return g_clamped.load(); }

Var make_op(Matrix value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.node());
    node->backward_fn = std::move(backward);
  }
  return Var(std::move(node));
}

void backward(const Var& output) {
  if (output.rows() != 1 || output.cols() != 1) throw std::logic_error("backward: output must be 1x1");
  if (!output.requires_grad()) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  // Iterative post-order DFS; graphs through recurrent layers get deep.
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(output.node().get(), 0);
  seen.insert(output.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  output.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() != 0) n->backward_fn(*n);
  }
  // Free interior gradients so a graph can be reused only through its leaves.
  for (Node* n : order) {
    if (n->backward_fn) n->grad.resize(0, 0);
  }
}

namespace {

Node& in(Node& n, std::size_t i) { return *n.inputs[i]; }

}  // namespace

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  return make_op(a.value() * b.value(), {a, b}, [](Node& n) {
    Node& x = in(n, 0);
    Node& y = in(n, 1);
    if (x.requires_grad) x.accumulate(n.grad * y.value.transpose());
    if (y.requires_grad) y.accumulate(x.value.transpose() * n.grad);
  });
}

Var matmul_transposed(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_transposed: dimension mismatch");
  return make_op(a.value() * b.value().transpose(), {a, b}, [](Node& n) {
    Node& x = in(n, 0);
    Node& y = in(n, 1);
    if (x.requires_grad) x.accumulate(n.grad * y.value);
    if (y.requires_grad) y.accumulate(n.grad.transpose() * x.value);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return make_op(a.value() + b.value(), {a, b}, [](Node& n) {
    if (in(n, 0).requires_grad) in(n, 0).accumulate(n.grad);
    if (in(n, 1).requires_grad) in(n, 1).accumulate(n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return make_op(a.value() - b.value(), {a, b}, [](Node& n) {
    if (in(n, 0).requires_grad) in(n, 0).accumulate(n.grad);
    if (in(n, 1).requires_grad) in(n, 1).accumulate(-n.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  return make_op(a.value().cwiseProduct(b.value()), {a, b}, [](Node& n) {
    Node& x = in(n, 0);
    Node& y = in(n, 1);
    if (x.requires_grad) x.accumulate(n.grad.cwiseProduct(y.value));
    if (y.requires_grad) y.accumulate(n.grad.cwiseProduct(x.value));
  });
}

Var scale(const Var& a, double s) {
  return make_op(a.value() * s, {a}, [s](Node& n) { in(n, 0).accumulate(n.grad * s); });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: bias must be 1 x cols");
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return make_op(std::move(out), {a, row}, [](Node& n) {
    if (in(n, 0).requires_grad) in(n, 0).accumulate(n.grad);
    if (in(n, 1).requires_grad) in(n, 1).accumulate(n.grad.colwise().sum());
  });
}

Var transpose(const Var& a) {
  return make_op(a.value().transpose(), {a}, [](Node& n) { in(n, 0).accumulate(n.grad.transpose()); });
}

Var tanh(const Var& a) {
  Matrix out = a.value().array().tanh().matrix();
  return make_op(out, {a}, [](Node& n) {
    in(n, 0).accumulate(n.grad.cwiseProduct((1.0 - n.value.array().square()).matrix()));
  });
}

Var gelu(const Var& a) {
  // tanh approximation; smooth everywhere, which finite-difference checks need.
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double k = 0.044715;
  const auto& x = a.value().array();
  Eigen::ArrayXXd inner = c * (x + k * x.cube());
  Eigen::ArrayXXd t = inner.tanh();
  Matrix out = (0.5 * x * (1.0 + t)).matrix();
  Eigen::ArrayXXd dx = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t.square()) * c * (1.0 + 3.0 * k * x.square());
  return make_op(std::move(out), {a}, [dx = std::move(dx)](Node& n) {
    in(n, 0).accumulate((n.grad.array() * dx).matrix());
  });
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const auto r = a.rows();
  const auto c = a.cols();
  return make_op(std::move(out), {a}, [r, c](Node& n) { in(n, 0).accumulate(Matrix::Constant(r, c, n.grad(0, 0))); });
}

Var mean(const Var& a) {
  if (a.value().size() == 0) throw std::invalid_argument("mean of empty matrix");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var softmax_rows(const Var& a) {
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double mx = a.value().row(i).maxCoeff();
    out.row(i) = (a.value().row(i).array() - mx).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return make_op(std::move(out), {a}, [](Node& n) {
    const Matrix& y = n.value;
    Vector dots = (n.grad.cwiseProduct(y)).rowwise().sum();
    Matrix g = y.cwiseProduct(n.grad - dots.replicate(1, y.cols()));
    in(n, 0).accumulate(g);
  });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const auto rows = x.rows();
  const auto cols = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != cols || beta.rows() != 1 || beta.cols() != cols) {
    throw std::invalid_argument("layer_norm_rows: gamma/beta must be 1 x cols");
  }
  Matrix xhat(rows, cols);
  Vector inv_std(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double mu = x.value().row(i).mean();
    const double var = (x.value().row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (x.value().row(i).array() - mu) * inv_std(i);
  }
  Matrix out = xhat;
  for (Eigen::Index i = 0; i < rows; ++i) {
    out.row(i) = xhat.row(i).cwiseProduct(gamma.value().row(0)) + beta.value().row(0);
  }
  return make_op(std::move(out), {x, gamma, beta}, [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& n) {
    Node& xn = in(n, 0);
    Node& gn = in(n, 1);
    Node& bn = in(n, 2);
    if (gn.requires_grad) gn.accumulate(n.grad.cwiseProduct(xhat).colwise().sum());
    if (bn.requires_grad) bn.accumulate(n.grad.colwise().sum());
    if (xn.requires_grad) {
      const auto c = static_cast<double>(xhat.cols());
      Matrix dxhat = n.grad.array().rowwise() * gn.value.row(0).array();
      Matrix dx(xhat.rows(), xhat.cols());
      for (Eigen::Index i = 0; i < xhat.rows(); ++i) {
        const double m1 = dxhat.row(i).sum();
        const double m2 = dxhat.row(i).dot(xhat.row(i));
        dx.row(i) = (inv_std(i) / c) * (c * dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
      }
      xn.accumulate(dx);
    }
  });
}

Var dropout(const Var& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw std::invalid_argument("dropout rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(x.rows(), x.cols());
  const double s = 1.0 / (1.0 - rate);
  for (Eigen::Index j = 0; j < mask.cols(); ++j) {
    for (Eigen::Index i = 0; i < mask.rows(); ++i) mask(i, j) = keep(rng) ? s : 0.0;
  }
  Matrix out = x.value().cwiseProduct(mask);
  return make_op(std::move(out), {x}, [mask = std::move(mask)](Node& n) {
    in(n, 0).accumulate(n.grad.cwiseProduct(mask));
  });
}

Var gather_rows(const Var& table, std::span<const int> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), table.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= table.rows()) throw std::out_of_range("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = table.value().row(rows[i]);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  return make_op(std::move(out), {table}, [idx = std::move(idx)](Node& n) {
    Node& t = in(n, 0);
    // row-sparse update; avoids materialising a table-sized gradient per lookup
    if (t.grad.size() == 0) t.grad = Matrix::Zero(t.value.rows(), t.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) t.grad.row(idx[i]) += n.grad.row(static_cast<Eigen::Index>(i));
  });
}

Var gather_cols(const Var& a, std::span<const int> cols) {
  Matrix out(a.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] < 0 || cols[j] >= a.cols()) throw std::out_of_range("gather_cols: index out of range");
    out.col(static_cast<Eigen::Index>(j)) = a.value().col(cols[j]);
  }
  std::vector<int> idx(cols.begin(), cols.end());
  return make_op(std::move(out), {a}, [idx = std::move(idx)](Node& n) {
    Node& t = in(n, 0);
    Matrix g = Matrix::Zero(t.value.rows(), t.value.cols());
    for (std::size_t j = 0; j < idx.size(); ++j) g.col(idx[j]) += n.grad.col(static_cast<Eigen::Index>(j));
    t.accumulate(g);
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
  Eigen::Index total = 0;
  const auto cols = parts.front().cols();
  for (const auto& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    total += p.rows();
  }
  Matrix out(total, cols);
  std::vector<Eigen::Index> sizes;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    sizes.push_back(p.rows());
    at += p.rows();
  }
  return make_op(std::move(out), std::vector<Var>(parts.begin(), parts.end()), [sizes = std::move(sizes)](Node& n) {
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (n.inputs[i]->requires_grad) n.inputs[i]->accumulate(n.grad.middleRows(at, sizes[i]));
      at += sizes[i];
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  Eigen::Index total = 0;
  const auto rows = parts.front().rows();
  for (const auto& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    total += p.cols();
  }
  Matrix out(rows, total);
  std::vector<Eigen::Index> sizes;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    sizes.push_back(p.cols());
    at += p.cols();
  }
  return make_op(std::move(out), std::vector<Var>(parts.begin(), parts.end()), [sizes = std::move(sizes)](Node& n) {
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (n.inputs[i]->requires_grad) n.inputs[i]->accumulate(n.grad.middleCols(at, sizes[i]));
      at += sizes[i];
    }
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw std::out_of_range("slice_rows: range");
  return make_op(a.value().middleRows(start, count), {a}, [start, count](Node& n) {
    Node& t = in(n, 0);
    if (t.grad.size() == 0) t.grad = Matrix::Zero(t.value.rows(), t.value.cols());
    t.grad.middleRows(start, count) += n.grad;
  });
}

Var cross_entropy_from_probs(const Var& probs, std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != probs.rows()) {
    throw std::invalid_argument("cross_entropy_from_probs: one label per row required");
  }
  std::size_t count = 0;
  double total = 0.0;
  std::uint64_t clamped = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0) continue;
    if (y >= probs.cols()) throw std::out_of_range("cross_entropy_from_probs: label outside label space");
    const double p = probs.value()(static_cast<Eigen::Index>(i), y);
    if (p < kProbFloor) ++clamped;
    total -= std::log(std::max(p, kProbFloor));
    ++count;
  }
  note_clamp(clamped);
  Matrix out(1, 1);
  out(0, 0) = count == 0 ? 0.0 : total / static_cast<double>(count);
  std::vector<int> idx(labels.begin(), labels.end());
  return make_op(std::move(out), {probs}, [idx = std::move(idx), count](Node& n) {
    if (count == 0) return;
    Node& p = in(n, 0);
    Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
    const double w = n.grad(0, 0) / static_cast<double>(count);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0) continue;
      const double v = p.value(static_cast<Eigen::Index>(i), idx[i]);
      if (v >= kProbFloor) g(static_cast<Eigen::Index>(i), idx[i]) = -w / v;
    }
    p.accumulate(g);
  });
}

}  // namespace scr::ag
