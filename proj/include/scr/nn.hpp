#pragma once

#include "scr/autograd.hpp"

#include <string>
#include <vector>

namespace scr::nn {

struct NamedParameter {
  std::string name;
  ag::Var var;
};

using ParameterList = std::vector<NamedParameter>;

ag::Var make_parameter(Matrix value);
Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng);

/// y = x W + b, with W stored as [in x out].
struct Linear {
  ag::Var weight;
  ag::Var bias;

  Linear() = default;
  Linear(Eigen::Index in, Eigen::Index out, double init_std, Rng& rng);

  ag::Var forward(const ag::Var& x) const;
  Eigen::Index in_dim() const { return weight.rows(); }
  Eigen::Index out_dim() const { return weight.cols(); }
  void collect(const std::string& prefix, ParameterList& out) const;
  Linear clone() const;
};

struct LayerNorm {
  ag::Var gamma;
  ag::Var beta;
  double eps = 1e-5;

  LayerNorm() = default;
  explicit LayerNorm(Eigen::Index dim, double eps = 1e-5);

  ag::Var forward(const ag::Var& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;
  LayerNorm clone() const;
};

/// Fresh leaf with a copy of the value; used for frozen snapshots.
ag::Var clone_parameter(const ag::Var& p);

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // <= 0 disables global-norm clipping
};

class Adam {
 public:
  Adam(std::vector<ag::Var> params, AdamOptions options);

  void zero_grad();
  void step();
  const AdamOptions& options() const { return options_; }

 private:
  std::vector<ag::Var> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  AdamOptions options_;
  long steps_ = 0;
};

std::vector<ag::Var> vars_of(const ParameterList& params);

}  // namespace scr::nn
