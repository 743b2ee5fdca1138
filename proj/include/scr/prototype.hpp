#pragma once

// Per-type feature statistics and the Gaussian feature enhancement of
// long-tail event types.

#include "scr/common.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace scr {

class PrototypeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Prototype {
  std::string event_type;
  Vector mu;
  Vector sigma;  // population std, elementwise
  int count = 0;
};

/// Mean and population standard deviation over the rows of `features`.
Prototype compute_prototype(const std::string& event_type, const Matrix& features);

class PrototypeStore {
 public:
  void put(Prototype prototype);
  bool contains(const std::string& type) const { return by_type_.count(type) > 0; }
  const Prototype& at(const std::string& type) const;
  std::size_t size() const { return by_type_.size(); }
  bool empty() const { return by_type_.empty(); }
  const std::map<std::string, Prototype>& all() const { return by_type_; }

  nlohmann::json to_json() const;
  static PrototypeStore from_json(const nlohmann::json& j);

 private:
  std::map<std::string, Prototype> by_type_;
};

/// sum over other prototypes of max(0, cos(mu_target, mu')) * sigma'. The
/// target's own prototype is excluded; negative similarities are clamped to
/// zero so the result stays a valid standard deviation.
Vector associated_std(const Prototype& target, const PrototypeStore& store);

/// Associated std for every type in the store.
std::map<std::string, Vector> associated_stds(const PrototypeStore& store);

/// Elementwise independent N(0, sigma_k^2) draw.
Vector sample_intensive_vector(const Vector& sigma, Rng& rng);

/// Adds a fresh intensive vector to every row whose entry in
/// `long_tail_type_of_row` is non-empty. Rows with an empty entry are left
/// untouched. Throws when a named type has no associated std.
Matrix enhance_long_tail(const Matrix& features, const std::vector<std::string>& long_tail_type_of_row,
                         const std::map<std::string, Vector>& assoc_std, Rng& rng);

/// Noise term of `enhance_long_tail` alone (zero rows for non-long-tail tokens).
Matrix long_tail_noise(Eigen::Index rows, Eigen::Index cols, const std::vector<std::string>& long_tail_type_of_row,
                       const std::map<std::string, Vector>& assoc_std, Rng& rng);

/// Ranks types by ascending instance count (ties by name) and returns the
/// floor(fraction * |types|) least frequent.
std::set<std::string> long_tail_types(const std::map<std::string, int>& counts, double fraction = 0.8);

}  // namespace scr
