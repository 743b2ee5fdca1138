#pragma once

// Experience replay: per-type exemplar stores filled by k-means selection.

#include "scr/common.hpp"
#include "scr/labels.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace scr {

class MemoryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KMeansOptions {
  int max_iterations = 100;
  double tolerance = 1e-6;  // stop once no centroid moves further than this
  int restarts = 4;         // keep the lowest-inertia run
};

/// Indices of the rows chosen as exemplars. With n <= m every row is
/// returned; otherwise k-means with k = m (k-means++ seeding) picks, per
/// cluster, the member nearest its centroid (ties to the lowest index).
std::vector<std::size_t> select_exemplar_indices(const Matrix& features, int m, std::uint64_t seed,
                                                 const KMeansOptions& options = {});

template <typename T>
std::vector<T> select_exemplars(std::span<const T> instances, const Matrix& features, int m, std::uint64_t seed,
                                const KMeansOptions& options = {}) {
  if (static_cast<Eigen::Index>(instances.size()) != features.rows()) {
    throw MemoryError("select_exemplars: one feature row per instance required");
  }
  std::vector<T> out;
  for (std::size_t i : select_exemplar_indices(features, m, seed, options)) out.push_back(instances[i]);
  return out;
}

/// A stored instance: reference to the trigger plus a frozen copy of the
/// sentence labels (gold and pseudo) at the time it was stored.
struct Exemplar {
  std::string sentence_id;
  Span trigger;
  std::string event_type;
  int stage = 0;
  LabeledSentence sentence;

  bool operator==(const Exemplar&) const = default;
};

class MemoryStore {
 public:
  explicit MemoryStore(int capacity_per_type = 10);

  int capacity() const { return capacity_; }
  /// Adds the selections of one stage. Every type must be new to the store.
  void update(const std::map<std::string, std::vector<Exemplar>>& stage_selections);

  const std::vector<Exemplar>& exemplars(const std::string& type) const;
  std::vector<std::string> types() const { return order_; }
  std::size_t total() const;
  bool contains(const std::string& type) const { return by_type_.count(type) > 0; }

  /// Every exemplar in type insertion order.
  std::vector<const Exemplar*> all() const;
  std::vector<Exemplar*> all_mutable();

  nlohmann::json to_json() const;
  static MemoryStore from_json(const nlohmann::json& j);

 private:
  int capacity_;
  std::vector<std::string> order_;
  std::map<std::string, std::vector<Exemplar>> by_type_;
};

nlohmann::json to_json(const LabeledSentence& s);
LabeledSentence labeled_sentence_from_json(const nlohmann::json& j);

}  // namespace scr
