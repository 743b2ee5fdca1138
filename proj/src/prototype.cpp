#include "scr/prototype.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace scr {

Prototype compute_prototype(const std::string& event_type, const Matrix& features) {
  if (features.rows() == 0) throw PrototypeError("no feature vectors for prototype of " + event_type);
  Prototype p;
  p.event_type = event_type;
  p.count = static_cast<int>(features.rows());
  p.mu = features.colwise().mean().transpose();
  Vector var = Vector::Zero(features.cols());
  for (Eigen::Index i = 0; i < features.rows(); ++i) var += (features.row(i).transpose() - p.mu).cwiseAbs2();
  p.sigma = (var / static_cast<double>(features.rows())).cwiseSqrt();
  return p;
}

void PrototypeStore::put(Prototype prototype) {
  if (prototype.count < 1) throw PrototypeError("prototype for " + prototype.event_type + " built from no instances");
  if ((prototype.sigma.array() < 0.0).any()) throw PrototypeError("negative std in prototype " + prototype.event_type);
  const auto key = prototype.event_type;
  by_type_[key] = std::move(prototype);
}

const Prototype& PrototypeStore::at(const std::string& type) const {
  auto it = by_type_.find(type);
  if (it == by_type_.end()) throw PrototypeError("no prototype for event type " + type);
  return it->second;
}

nlohmann::json PrototypeStore::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [type, p] : by_type_) {
    j[type] = {{"mu", std::vector<double>(p.mu.data(), p.mu.data() + p.mu.size())},
               {"sigma", std::vector<double>(p.sigma.data(), p.sigma.data() + p.sigma.size())},
               {"count", p.count}};
  }
  return j;
}

PrototypeStore PrototypeStore::from_json(const nlohmann::json& j) {
  PrototypeStore store;
  for (const auto& [type, v] : j.items()) {
    Prototype p;
    p.event_type = type;
    const auto mu = v.at("mu").get<std::vector<double>>();
    const auto sigma = v.at("sigma").get<std::vector<double>>();
    p.mu = Eigen::Map<const Vector>(mu.data(), static_cast<Eigen::Index>(mu.size()));
    p.sigma = Eigen::Map<const Vector>(sigma.data(), static_cast<Eigen::Index>(sigma.size()));
    p.count = v.at("count").get<int>();
    store.put(std::move(p));
  }
  return store;
}

Vector associated_std(const Prototype& target, const PrototypeStore& store) {
  if (store.empty()) throw PrototypeError("associated_std needs a non-empty prototype store");
  Vector out = Vector::Zero(target.mu.size());
  double total_weight = 0.0;
  const double nt = target.mu.norm();
  for (const auto& [type, p] : store.all()) {
    if (type == target.event_type) continue;
    if (p.mu.size() != target.mu.size()) throw PrototypeError("prototype dimensions differ");
    const double np = p.mu.norm();
    const double cos = (nt > 0.0 && np > 0.0) ? target.mu.dot(p.mu) / (nt * np) : 0.0;
    const double w = std::max(0.0, cos);
    out += w * p.sigma;
    total_weight += w;
  }
  if (total_weight == 0.0) spdlog::debug("associated_std: no positively associated prototype for {}", target.event_type);
  return out;
}

std::map<std::string, Vector> associated_stds(const PrototypeStore& store) {
  std::map<std::string, Vector> out;
  for (const auto& [type, p] : store.all()) out[type] = associated_std(p, store);
  return out;
}

Vector sample_intensive_vector(const Vector& sigma, Rng& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  Vector out(sigma.size());
  for (Eigen::Index k = 0; k < sigma.size(); ++k) {
    if (sigma(k) < 0.0) throw PrototypeError("negative standard deviation");
    out(k) = sigma(k) * unit(rng);
  }
  return out;
}

Matrix long_tail_noise(Eigen::Index rows, Eigen::Index cols, const std::vector<std::string>& long_tail_type_of_row,
                       const std::map<std::string, Vector>& assoc_std, Rng& rng) {
  if (static_cast<Eigen::Index>(long_tail_type_of_row.size()) != rows) {
    throw PrototypeError("long-tail mask must have one entry per feature row");
  }
  Matrix noise = Matrix::Zero(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& type = long_tail_type_of_row[static_cast<std::size_t>(i)];
    if (type.empty()) continue;
    auto it = assoc_std.find(type);
    if (it == assoc_std.end()) throw PrototypeError("no prototype for long-tail type " + type);
    if (it->second.size() != cols) throw PrototypeError("associated std width differs from feature width");
    noise.row(i) = sample_intensive_vector(it->second, rng).transpose();
  }
  return noise;
}

Matrix enhance_long_tail(const Matrix& features, const std::vector<std::string>& long_tail_type_of_row,
                         const std::map<std::string, Vector>& assoc_std, Rng& rng) {
  return features + long_tail_noise(features.rows(), features.cols(), long_tail_type_of_row, assoc_std, rng);
}

std::set<std::string> long_tail_types(const std::map<std::string, int>& counts, double fraction) {
  if (fraction < 0.0 || fraction > 1.0) throw PrototypeError("long-tail fraction must lie in [0, 1]");
  std::vector<std::pair<int, std::string>> ranked;
  for (const auto& [type, c] : counts) ranked.emplace_back(c, type);
  std::sort(ranked.begin(), ranked.end());
  const auto take = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(ranked.size()) + 1e-9));
  std::set<std::string> out;
  for (std::size_t i = 0; i < take; ++i) out.insert(ranked[i].second);
  return out;
}

}  // namespace scr
