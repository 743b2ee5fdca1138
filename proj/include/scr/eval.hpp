#pragma once

// Micro-averaged trigger / argument F1, the per-task F1 matrix with backward
// transfer, long-tail slices, and report emission.

#include "scr/corpus.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace scr {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t correct = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
};

/// F1 = 2PR/(P+R), 0 when P+R = 0.
Prf prf_from_counts(std::size_t correct, std::size_t predicted, std::size_t gold);

/// Triggers count when sentence, span and type all match. Predictions are
/// aligned to gold by sentence id; a predicted id absent from gold is an
/// error. When `types` is given, both sides are filtered to those types.
Prf detection_f1(const std::vector<TokenizedSentence>& predictions, const std::vector<TokenizedSentence>& gold,
                 const std::set<std::string>* types = nullptr);

/// Same protocol over (event type, argument span, role).
Prf argument_f1(const std::vector<TokenizedSentence>& predictions, const std::vector<TokenizedSentence>& gold,
                const std::set<std::string>* types = nullptr);

/// Detection F1 restricted to long-tail types; absent when the gold side has
/// no long-tail mention.
std::optional<Prf> long_tail_slice(const std::vector<TokenizedSentence>& predictions,
                                   const std::vector<TokenizedSentence>& gold,
                                   const std::set<std::string>& long_tail_types);

/// Lower-triangular F1_{i,j}: score on task j's test set after stage i (1-based).
class F1Matrix {
 public:
  explicit F1Matrix(int tasks = 0);

  int tasks() const { return tasks_; }
  void set(int stage, int task, double f1);
  std::optional<double> get(int stage, int task) const;
  double at(int stage, int task) const;
  /// Highest stage whose row is fully populated.
  int completed_stages() const;

  nlohmann::json to_json() const;
  static F1Matrix from_json(const nlohmann::json& j);

 private:
  int tasks_;
  std::vector<std::vector<std::optional<double>>> rows_;
};

/// (1/(K-1)) sum_{i<K} (F1_{K,i} - F1_{i,i}).
double bwt(const F1Matrix& matrix);

struct StageReport {
  int stage = 0;
  Prf detection;
  std::optional<Prf> arguments;
  std::optional<Prf> long_tail;
  std::optional<Prf> popular;
  std::vector<double> task_f1;                 // F1_{stage, j} for j = 1..stage
  std::map<std::string, int> type_counts;      // training mention counts per seen type

  nlohmann::json to_json() const;
  static StageReport from_json(const nlohmann::json& j);
};

/// One row per stage per metric: stage,metric,value.
void write_report_csv(const std::vector<StageReport>& reports, const std::string& path);
nlohmann::json summary_json(const std::vector<StageReport>& reports, const F1Matrix& matrix);

}  // namespace scr
