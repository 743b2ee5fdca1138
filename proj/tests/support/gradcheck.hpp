#pragma once

#include "scr/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace testing_support {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;
  int checked = 0;
};

/// Compares reverse-mode gradients of `loss` with central differences for up
/// to `per_param` entries of each parameter (every entry when <= 0).
/// Relative error is |a - n| / max(|a| + |n|, floor).
inline GradCheckResult grad_check(const std::vector<std::pair<std::string, scr::ag::Var>>& params,
                                  const std::function<scr::ag::Var()>& loss, int per_param = 0,
                                  double eps = 1e-5, double floor = 1e-6) {
  for (const auto& entry : params) {
    scr::ag::Var p = entry.second;
    p.zero_grad();
  }
  scr::ag::Var out = loss();
  scr::ag::backward(out);
  GradCheckResult result;
  for (const auto& [name, pc] : params) {
    scr::ag::Var p = pc;
    const scr::Matrix analytic = p.grad().size() ? p.grad() : scr::Matrix::Zero(p.rows(), p.cols());
    const Eigen::Index total = p.value().size();
    const Eigen::Index count = per_param <= 0 ? total : std::min<Eigen::Index>(total, per_param);
    for (Eigen::Index c = 0; c < count; ++c) {
      // spread the probed entries over the whole tensor
      const Eigen::Index idx = per_param <= 0 ? c : (c * 7919) % total;
      double& v = p.mutable_value().data()[idx];
      const double saved = v;
      v = saved + eps;
      const double up = loss().item();
      v = saved - eps;
      const double down = loss().item();
      v = saved;
      const double numeric = (up - down) / (2 * eps);
      const double a = analytic.data()[idx];
      const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), floor);
      ++result.checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst = name + "[" + std::to_string(idx) + "] analytic=" + std::to_string(a) +
                       " numeric=" + std::to_string(numeric);
      }
    }
  }
  return result;
}

}  // namespace testing_support
