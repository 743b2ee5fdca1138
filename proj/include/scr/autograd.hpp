#pragma once

// Minimal reverse-mode automatic differentiation over dense Eigen matrices.
//
// Every value is a 2-D double matrix. Ops record their inputs and a closure
// that pushes the output gradient back into them; `backward` walks the graph
// in reverse topological order. Graphs are per-forward and freed with the
// last Var that references them. Parameters are long-lived leaves whose
// gradients accumulate until `zero_grad`.

#include "scr/common.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace scr::ag {

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  void accumulate(const Matrix& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double item() const;

  void zero_grad();
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Matrix value);
Var scalar(double value);

/// Runs reverse accumulation from a 1x1 output.
void backward(const Var& output);

/// While alive, new ops on this thread record no graph.
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

/// Builds an op result. `backward` receives the output node (value and grad
/// already populated) and must accumulate into the inputs that need it.
Var make_op(Matrix value, std::vector<Var> inputs, std::function<void(Node&)> backward);

// Linear algebra and elementwise ops.
Var matmul(const Var& a, const Var& b);
Var matmul_transposed(const Var& a, const Var& b);  // a * b^T
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_row(const Var& a, const Var& row);  // broadcast 1 x c over rows
Var transpose(const Var& a);
Var tanh(const Var& a);
Var gelu(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);

// Row-structured ops.
Var softmax_rows(const Var& a);
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var dropout(const Var& x, double rate, Rng& rng);
Var gather_rows(const Var& table, std::span<const int> rows);
Var gather_cols(const Var& a, std::span<const int> cols);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);

/// Mean over selected rows of -log(max(p[row, label], 1e-12)). Rows with
/// label < 0 are skipped. Empty selection yields 0.
Var cross_entropy_from_probs(const Var& probs, std::span<const int> labels);

/// Count of probability lookups clamped at 1e-12 since process start.
std::uint64_t clamped_log_count();

}  // namespace scr::ag
