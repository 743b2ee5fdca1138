#include "scr/losses.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <stdexcept>

namespace scr {

namespace {

constexpr double kFloor = 1e-12;

void check_rows(std::span<const int> rows, Eigen::Index n, const char* op) {
  for (int r : rows) {
    if (r < 0 || r >= n) throw std::out_of_range(std::string(op) + ": row index out of range");
  }
}

}  // namespace

ag::Var classification_loss(const ag::Var& probs, std::span<const int> labels) {
  return ag::cross_entropy_from_probs(probs, labels);
}

double classification_loss(const Matrix& probs, std::span<const int> labels) {
  return classification_loss(ag::constant(probs), labels).item();
}

ag::Var afd_loss(const ag::Var& student_attentive, const ag::Var& teacher_attentive, std::span<const int> rows) {
  if (student_attentive.rows() != teacher_attentive.rows() || student_attentive.cols() != teacher_attentive.cols()) {
    throw std::invalid_argument("afd_loss: student and teacher features differ in shape");
  }
  check_rows(rows, student_attentive.rows(), "afd_loss");
  if (rows.empty()) {
    spdlog::debug("afd_loss: empty token set");
    return ag::scalar(0.0);
  }
  const Matrix& a = student_attentive.value();
  const Matrix& b = teacher_attentive.value();
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  double total = 0.0;
  int degenerate = 0;
  for (int r : rows) {
    const double na = a.row(r).norm();
    const double nb = b.row(r).norm();
    double cos = 0.0;
    if (na > 0.0 && nb > 0.0) {
      cos = a.row(r).dot(b.row(r)) / (na * nb);
    } else {
      ++degenerate;
    }
    total += 1.0 - cos;
  }
  if (degenerate > 0) spdlog::warn("afd_loss: {} zero-norm attentive feature(s) scored as cosine 0", degenerate);
  Matrix out(1, 1);
  out(0, 0) = total * inv_n;
  std::vector<int> idx(rows.begin(), rows.end());
  return ag::make_op(std::move(out), {student_attentive, teacher_attentive}, [idx = std::move(idx), inv_n](ag::Node& n) {
    ag::Node& sa = *n.inputs[0];
    ag::Node& tb = *n.inputs[1];
    const double g = n.grad(0, 0) * inv_n;
    Matrix ga = Matrix::Zero(sa.value.rows(), sa.value.cols());
    Matrix gb = Matrix::Zero(tb.value.rows(), tb.value.cols());
    for (int r : idx) {
      const auto av = sa.value.row(r);
      const auto bv = tb.value.row(r);
      const double na = av.norm();
      const double nb = bv.norm();
      if (na == 0.0 || nb == 0.0) continue;
      const double cos = av.dot(bv) / (na * nb);
      // d(1 - cos)/da = -(b/(|a||b|) - cos a/|a|^2)
      ga.row(r) += -g * (bv / (na * nb) - cos * av / (na * na));
      gb.row(r) += -g * (av / (na * nb) - cos * bv / (nb * nb));
    }
    if (sa.requires_grad) sa.accumulate(ga);
    if (tb.requires_grad) tb.accumulate(gb);
  });
}

double afd_loss(const Matrix& student_attentive, const Matrix& teacher_attentive, std::span<const int> rows) {
  return afd_loss(ag::constant(student_attentive), ag::constant(teacher_attentive), rows).item();
}

ag::Var spd_loss(const ag::Var& student_probs, const Matrix& teacher_probs, std::span<const int> rows,
                 std::span<const int> prev_columns) {
  if (teacher_probs.rows() != student_probs.rows()) throw std::invalid_argument("spd_loss: row count mismatch");
  check_rows(rows, student_probs.rows(), "spd_loss");
  for (int c : prev_columns) {
    if (c < 0 || c >= teacher_probs.cols() || c >= student_probs.cols()) {
      throw std::out_of_range("spd_loss: previous-type column outside a label space");
    }
  }
  if (prev_columns.empty()) return ag::scalar(0.0);
  if (rows.empty()) {
    spdlog::debug("spd_loss: every token belongs to a new type; nothing to distil");
    return ag::scalar(0.0);
  }
  const Matrix& s = student_probs.value();
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  double total = 0.0;
  for (int r : rows) {
    for (int c : prev_columns) total -= teacher_probs(r, c) * std::log(std::max(s(r, c), kFloor));
  }
  Matrix out(1, 1);
  out(0, 0) = total * inv_n;
  std::vector<int> idx(rows.begin(), rows.end());
  std::vector<int> cols(prev_columns.begin(), prev_columns.end());
  return ag::make_op(std::move(out), {student_probs},
                     [idx = std::move(idx), cols = std::move(cols), teacher = teacher_probs, inv_n](ag::Node& n) {
                       ag::Node& sp = *n.inputs[0];
                       Matrix g = Matrix::Zero(sp.value.rows(), sp.value.cols());
                       const double w = n.grad(0, 0) * inv_n;
                       for (int r : idx) {
                         for (int c : cols) {
                           const double v = sp.value(r, c);
                           if (v >= kFloor) g(r, c) -= w * teacher(r, c) / v;
                         }
                       }
                       sp.accumulate(g);
                     });
}

double spd_loss(const Matrix& student_probs, const Matrix& teacher_probs, std::span<const int> rows,
                std::span<const int> prev_columns) {
  return spd_loss(ag::constant(student_probs), teacher_probs, rows, prev_columns).item();
}

namespace {

double rho_of(int n_prev, int n_seen) {
  if (n_seen <= 0 || n_prev < 0 || n_prev > n_seen) {
    throw std::invalid_argument("combined_loss: need 0 <= previous types <= seen types, seen > 0");
  }
  return static_cast<double>(n_prev) / static_cast<double>(n_seen);
}

}  // namespace

ag::Var combined_loss(const ag::Var& l_cls, const ag::Var& l_afd, const ag::Var& l_spd, int n_prev_types,
                      int n_seen_types, const DistillationWeights& w) {
  const double rho = rho_of(n_prev_types, n_seen_types);
  if (rho == 0.0) return l_cls;
  ag::Var distil = ag::add(ag::scale(l_afd, w.alpha), ag::scale(l_spd, w.beta));
  return ag::add(ag::scale(l_cls, 1.0 - rho), ag::scale(distil, rho));
}

double combined_loss(double l_cls, double l_afd, double l_spd, int n_prev_types, int n_seen_types,
                     const DistillationWeights& w) {
  const double rho = rho_of(n_prev_types, n_seen_types);
  return (1.0 - rho) * l_cls + rho * (w.alpha * l_afd + w.beta * l_spd);
}

}  // namespace scr
