#pragma once

// Detection objectives: token classification, attention feature
// distillation, selective prediction distillation, and their weighted sum.
//
// Row selections are passed as index lists into the stacked token rows of a
// batch. Label vectors use -1 for rows outside the token set.

#include "scr/autograd.hpp"

#include <span>

namespace scr {

/// -(1/|N|) sum_x log P(y_x | x); probabilities are clamped at 1e-12.
ag::Var classification_loss(const ag::Var& probs, std::span<const int> labels);
double classification_loss(const Matrix& probs, std::span<const int> labels);

/// (1/|N|) sum_x (1 - cos(A_x^student, A_x^teacher)). A zero-norm row counts
/// as cosine 0. Empty selection yields 0.
ag::Var afd_loss(const ag::Var& student_attentive, const ag::Var& teacher_attentive, std::span<const int> rows);
double afd_loss(const Matrix& student_attentive, const Matrix& teacher_attentive, std::span<const int> rows);

/// -(1/|N~|) sum_{x in rows} sum_{c in prev_columns} T[x,c] log S[x,c]. The
/// student is read from its full softmax at the previous types' columns,
/// which coincide with the teacher's because label spaces only append.
ag::Var spd_loss(const ag::Var& student_probs, const Matrix& teacher_probs, std::span<const int> rows,
                 std::span<const int> prev_columns);
double spd_loss(const Matrix& student_probs, const Matrix& teacher_probs, std::span<const int> rows,
                std::span<const int> prev_columns);

struct DistillationWeights {
  double alpha = 1.0;
  double beta = 1.0;
};

/// (1 - rho) l_cls + rho (alpha l_afd + beta l_spd), rho = n_prev / n_seen.
ag::Var combined_loss(const ag::Var& l_cls, const ag::Var& l_afd, const ag::Var& l_spd, int n_prev_types,
                      int n_seen_types, const DistillationWeights& weights);
double combined_loss(double l_cls, double l_afd, double l_spd, int n_prev_types, int n_seen_types,
                     const DistillationWeights& weights);

}  // namespace scr
