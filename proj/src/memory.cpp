#include "scr/memory.hpp"

#include <algorithm>
#include <limits>

namespace scr {

namespace {

struct Clustering {
  Matrix centroids;
  std::vector<int> assignment;
  double inertia = 0.0;
};

int nearest(const Matrix& centroids, const Eigen::Ref<const RowVector>& x, double* dist = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

Matrix plus_plus_init(const Matrix& x, int k, Rng& rng) {
  const auto n = x.rows();
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  Matrix centroids(k, x.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  Eigen::Index pick = first(rng);
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (int c = 0; c < k; ++c) {
    if (c > 0) {
      std::vector<double> w(static_cast<std::size_t>(n), 0.0);
      double total = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!chosen[static_cast<std::size_t>(i)]) total += (w[static_cast<std::size_t>(i)] = d2[static_cast<std::size_t>(i)]);
      }
      if (total <= 0.0) {
        // Remaining points coincide with chosen ones; pick uniformly among them.
        for (Eigen::Index i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = chosen[static_cast<std::size_t>(i)] ? 0.0 : 1.0;
      }
      std::discrete_distribution<Eigen::Index> dist(w.begin(), w.end());
      pick = dist(rng);
    }
    chosen[static_cast<std::size_t>(pick)] = 1;
    centroids.row(c) = x.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], (x.row(i) - x.row(pick)).squaredNorm());
    }
  }
  return centroids;
}

Clustering lloyd(const Matrix& x, Matrix centroids, const KMeansOptions& o) {
  const auto n = x.rows();
  const auto k = centroids.rows();
  Clustering r;
  r.assignment.assign(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter < o.max_iterations; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) r.assignment[static_cast<std::size_t>(i)] = nearest(centroids, x.row(i));
    Matrix next = Matrix::Zero(k, x.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = r.assignment[static_cast<std::size_t>(i)];
      next.row(c) += x.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    double moved = 0.0;
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) {
        next.row(c) = centroids.row(c);
      } else {
        next.row(c) /= counts[static_cast<std::size_t>(c)];
      }
      moved = std::max(moved, (next.row(c) - centroids.row(c)).norm());
    }
    centroids = std::move(next);
    if (moved < o.tolerance) break;
  }
  r.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double d = 0.0;
    r.assignment[static_cast<std::size_t>(i)] = nearest(centroids, x.row(i), &d);
    r.inertia += d;
  }
  r.centroids = std::move(centroids);
  return r;
}

}  // namespace

std::vector<std::size_t> select_exemplar_indices(const Matrix& features, int m, std::uint64_t seed,
                                                 const KMeansOptions& options) {
  const auto n = features.rows();
  if (n == 0) throw MemoryError("select_exemplars: no instances to select from");
  if (m < 0) throw MemoryError("select_exemplars: negative memory size");
  std::vector<std::size_t> out;
  if (m == 0) return out;
  if (n <= m) {
    for (Eigen::Index i = 0; i < n; ++i) out.push_back(static_cast<std::size_t>(i));
    return out;
  }

  Clustering best;
  bool have = false;
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    Rng rng(derive_seed(seed, "kmeans", static_cast<std::uint64_t>(r)));
    Clustering c = lloyd(features, plus_plus_init(features, m, rng), options);
    if (!have || c.inertia < best.inertia) {
      best = std::move(c);
      have = true;
    }
  }

  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  for (int c = 0; c < m; ++c) {
    Eigen::Index pick = -1;
    double pick_d = std::numeric_limits<double>::infinity();
    bool has_members = false;
    for (Eigen::Index i = 0; i < n; ++i) has_members = has_members || best.assignment[static_cast<std::size_t>(i)] == c;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      if (has_members && best.assignment[static_cast<std::size_t>(i)] != c) continue;
      const double d = (features.row(i) - best.centroids.row(c)).squaredNorm();
      if (d < pick_d) {
        pick_d = d;
        pick = i;
      }
    }
    if (pick < 0) continue;
    taken[static_cast<std::size_t>(pick)] = 1;
    out.push_back(static_cast<std::size_t>(pick));
  }
  return out;
}

MemoryStore::MemoryStore(int capacity_per_type) : capacity_(capacity_per_type) {
  if (capacity_per_type < 0) throw MemoryError("memory size must be >= 0");
}

void MemoryStore::update(const std::map<std::string, std::vector<Exemplar>>& stage_selections) {
  for (const auto& [type, list] : stage_selections) {
    if (type == kNoneLabel) throw MemoryError("negative (NA) instances are never stored");
    if (by_type_.count(type)) throw MemoryError("memory already holds exemplars for " + type);
    if (static_cast<int>(list.size()) > capacity_) {
      throw MemoryError("selection for " + type + " exceeds memory size " + std::to_string(capacity_));
    }
    for (const auto& e : list) {
      if (e.event_type != type) throw MemoryError("exemplar of type " + e.event_type + " filed under " + type);
    }
  }
  for (const auto& [type, list] : stage_selections) {
    order_.push_back(type);
    by_type_[type] = list;
  }
}

const std::vector<Exemplar>& MemoryStore::exemplars(const std::string& type) const {
  static const std::vector<Exemplar> kEmpty;
  auto it = by_type_.find(type);
  return it == by_type_.end() ? kEmpty : it->second;
}

std::size_t MemoryStore::total() const {
  std::size_t n = 0;
  for (const auto& [t, l] : by_type_) n += l.size();
  return n;
}

std::vector<const Exemplar*> MemoryStore::all() const {
  std::vector<const Exemplar*> out;
  for (const auto& t : order_) {
    for (const auto& e : by_type_.at(t)) out.push_back(&e);
  }
  return out;
}

std::vector<Exemplar*> MemoryStore::all_mutable() {
  std::vector<Exemplar*> out;
  for (const auto& t : order_) {
    for (auto& e : by_type_.at(t)) out.push_back(&e);
  }
  return out;
}

nlohmann::json to_json(const LabeledSentence& s) {
  auto labels = nlohmann::json::array();
  for (const auto& l : s.labels) labels.push_back(to_json(l));
  return {{"id", s.id}, {"tokens", s.tokens}, {"labels", std::move(labels)}};
}

LabeledSentence labeled_sentence_from_json(const nlohmann::json& j) {
  LabeledSentence s;
  s.id = j.at("id").get<std::string>();
  s.tokens = j.at("tokens").get<std::vector<std::string>>();
  for (const auto& l : j.at("labels")) s.labels.push_back(token_label_from_json(l));
  if (s.labels.size() != s.tokens.size()) throw MemoryError("exemplar " + s.id + ": label count differs from token count");
  return s;
}

nlohmann::json MemoryStore::to_json() const {
  nlohmann::json types = nlohmann::json::array();
  for (const auto& t : order_) {
    auto list = nlohmann::json::array();
    for (const auto& e : by_type_.at(t)) {
      list.push_back({{"sentence_id", e.sentence_id},
                      {"trigger", {e.trigger.start, e.trigger.end}},
                      {"stage", e.stage},
                      {"sentence", scr::to_json(e.sentence)}});
    }
    types.push_back({{"type", t}, {"exemplars", std::move(list)}});
  }
  return {{"capacity", capacity_}, {"types", std::move(types)}};
}

MemoryStore MemoryStore::from_json(const nlohmann::json& j) {
  MemoryStore store(j.at("capacity").get<int>());
  for (const auto& entry : j.at("types")) {
    const auto type = entry.at("type").get<std::string>();
    std::vector<Exemplar> list;
    for (const auto& e : entry.at("exemplars")) {
      Exemplar ex;
      ex.sentence_id = e.at("sentence_id").get<std::string>();
      ex.trigger = {e.at("trigger")[0].get<int>(), e.at("trigger")[1].get<int>()};
      ex.event_type = type;
      ex.stage = e.at("stage").get<int>();
      ex.sentence = labeled_sentence_from_json(e.at("sentence"));
      list.push_back(std::move(ex));
    }
    store.update({{type, std::move(list)}});
  }
  return store;
}

}  // namespace scr
