#include "scr/nn.hpp"

#include <cmath>

namespace scr::nn {

ag::Var make_parameter(Matrix value) { return ag::Var(std::move(value), true); }

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

Linear::Linear(Eigen::Index in, Eigen::Index out, double init_std, Rng& rng)
    : weight(make_parameter(normal_matrix(in, out, init_std, rng))), bias(make_parameter(Matrix::Zero(1, out))) {}

ag::Var Linear::forward(const ag::Var& x) const { return ag::add_row(ag::matmul(x, weight), bias); }

void Linear::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

Linear Linear::clone() const {
  Linear l;
  l.weight = clone_parameter(weight);
  l.bias = clone_parameter(bias);
  return l;
}

LayerNorm::LayerNorm(Eigen::Index dim, double eps_)
    : gamma(make_parameter(Matrix::Ones(1, dim))), beta(make_parameter(Matrix::Zero(1, dim))), eps(eps_) {}

ag::Var LayerNorm::forward(const ag::Var& x) const { return ag::layer_norm_rows(x, gamma, beta, eps); }

void LayerNorm::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

LayerNorm LayerNorm::clone() const {
  LayerNorm l;
  l.gamma = clone_parameter(gamma);
  l.beta = clone_parameter(beta);
  l.eps = eps;
  return l;
}

ag::Var clone_parameter(const ag::Var& p) { return ag::Var(p.value(), p.requires_grad()); }

std::vector<ag::Var> vars_of(const ParameterList& params) {
  std::vector<ag::Var> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.var);
  return out;
}

Adam::Adam(std::vector<ag::Var> params, AdamOptions options) : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Adam::step() {
  ++steps_;
  double scale = 1.0;
  if (options_.clip_norm > 0.0) {
    double sq = 0.0;
    for (const auto& p : params_) {
      if (p.grad().size() != 0) sq += p.grad().squaredNorm();
    }
    const double norm = std::sqrt(sq);
    if (norm > options_.clip_norm) scale = options_.clip_norm / norm;
  }
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (p.grad().size() == 0) continue;
    const auto g = p.grad().array() * scale;
    m_[i].array() = options_.beta1 * m_[i].array() + (1.0 - options_.beta1) * g;
    v_[i].array() = options_.beta2 * v_[i].array() + (1.0 - options_.beta2) * g.square();
    p.mutable_value().array() -=
        options_.lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + options_.eps);
  }
}

}  // namespace scr::nn
