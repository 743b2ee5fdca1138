#include "scr/eval.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <tuple>

namespace scr {

Prf prf_from_counts(std::size_t correct, std::size_t predicted, std::size_t gold) {
  Prf r;
  r.correct = correct;
  r.predicted = predicted;
  r.gold = gold;
  r.precision = predicted == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(predicted);
  r.recall = gold == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(gold);
  const double s = r.precision + r.recall;
  r.f1 = s == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / s;
  return r;
}

namespace {

using TriggerKey = std::tuple<std::string, int, int, std::string>;
using ArgumentKey = std::tuple<std::string, std::string, int, int, std::string>;

bool keep(const std::string& type, const std::set<std::string>* types) { return types == nullptr || types->count(type); }

std::set<TriggerKey> trigger_keys(const std::vector<TokenizedSentence>& ss, const std::set<std::string>* types) {
  std::set<TriggerKey> out;
  for (const auto& s : ss) {
    for (const auto& ev : s.events) {
      if (keep(ev.event_type, types)) out.emplace(s.id, ev.trigger.start, ev.trigger.end, ev.event_type);
    }
  }
  return out;
}

std::set<ArgumentKey> argument_keys(const std::vector<TokenizedSentence>& ss, const std::set<std::string>* types) {
  std::set<ArgumentKey> out;
  for (const auto& s : ss) {
    for (const auto& ev : s.events) {
      if (!keep(ev.event_type, types)) continue;
      for (const auto& a : ev.arguments) out.emplace(s.id, ev.event_type, a.span.start, a.span.end, a.role);
    }
  }
  return out;
}

void check_alignment(const std::vector<TokenizedSentence>& predictions, const std::vector<TokenizedSentence>& gold) {
  std::set<std::string> ids;
  for (const auto& g : gold) ids.insert(g.id);
  for (const auto& p : predictions) {
    if (!ids.count(p.id)) throw EvalError("prediction for unknown sentence id '" + p.id + "'");
  }
}

template <typename Key>
Prf score(const std::set<Key>& predicted, const std::set<Key>& gold) {
  std::size_t correct = 0;
  for (const auto& k : predicted) correct += gold.count(k);
  return prf_from_counts(correct, predicted.size(), gold.size());
}

}  // namespace

Prf detection_f1(const std::vector<TokenizedSentence>& predictions, const std::vector<TokenizedSentence>& gold,
                 const std::set<std::string>* types) {
  check_alignment(predictions, gold);
  return score(trigger_keys(predictions, types), trigger_keys(gold, types));
}

Prf argument_f1(const std::vector<TokenizedSentence>& predictions, const std::vector<TokenizedSentence>& gold,
                const std::set<std::string>* types) {
  check_alignment(predictions, gold);
  return score(argument_keys(predictions, types), argument_keys(gold, types));
}

std::optional<Prf> long_tail_slice(const std::vector<TokenizedSentence>& predictions,
                                   const std::vector<TokenizedSentence>& gold,
                                   const std::set<std::string>& long_tail_types) {
  check_alignment(predictions, gold);
  auto g = trigger_keys(gold, &long_tail_types);
  if (g.empty()) return std::nullopt;
  return score(trigger_keys(predictions, &long_tail_types), g);
}

F1Matrix::F1Matrix(int tasks) : tasks_(tasks), rows_(static_cast<std::size_t>(std::max(tasks, 0))) {
  if (tasks < 0) throw EvalError("F1Matrix: negative task count");
  for (int i = 0; i < tasks; ++i) rows_[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(i + 1));
}

void F1Matrix::set(int stage, int task, double f1) {
  if (stage < 1 || stage > tasks_ || task < 1 || task > stage) {
    throw EvalError("F1Matrix: entry (" + std::to_string(stage) + ", " + std::to_string(task) + ") outside the lower triangle");
  }
  if (f1 < 0.0 || f1 > 1.0) throw EvalError("F1Matrix: value outside [0, 1]");
  rows_[static_cast<std::size_t>(stage - 1)][static_cast<std::size_t>(task - 1)] = f1;
}

std::optional<double> F1Matrix::get(int stage, int task) const {
  if (stage < 1 || stage > tasks_ || task < 1 || task > stage) return std::nullopt;
  return rows_[static_cast<std::size_t>(stage - 1)][static_cast<std::size_t>(task - 1)];
}

double F1Matrix::at(int stage, int task) const {
  auto v = get(stage, task);
  if (!v) throw EvalError("F1Matrix: entry (" + std::to_string(stage) + ", " + std::to_string(task) + ") missing");
  return *v;
}

int F1Matrix::completed_stages() const {
  int done = 0;
  for (int i = 1; i <= tasks_; ++i) {
    for (int j = 1; j <= i; ++j) {
      if (!get(i, j)) return done;
    }
    done = i;
  }
  return done;
}

nlohmann::json F1Matrix::to_json() const {
  auto rows = nlohmann::json::array();
  for (const auto& r : rows_) {
    auto row = nlohmann::json::array();
    for (const auto& v : r) row.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
    rows.push_back(std::move(row));
  }
  return {{"tasks", tasks_}, {"rows", std::move(rows)}};
}

F1Matrix F1Matrix::from_json(const nlohmann::json& j) {
  F1Matrix m(j.at("tasks").get<int>());
  const auto& rows = j.at("rows");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows[i].size(); ++k) {
      if (!rows[i][k].is_null()) m.set(static_cast<int>(i + 1), static_cast<int>(k + 1), rows[i][k].get<double>());
    }
  }
  return m;
}

double bwt(const F1Matrix& matrix) {
  const int k = matrix.tasks();
  if (k < 2) throw EvalError("BWT needs at least two tasks");
  double acc = 0.0;
  for (int i = 1; i < k; ++i) acc += matrix.at(k, i) - matrix.at(i, i);
  return acc / static_cast<double>(k - 1);
}

namespace {

nlohmann::json prf_json(const Prf& p) {
  return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1},
          {"correct", p.correct},     {"predicted", p.predicted}, {"gold", p.gold}};
}

Prf prf_from_json(const nlohmann::json& j) {
  Prf p;
  p.precision = j.at("precision").get<double>();
  p.recall = j.at("recall").get<double>();
  p.f1 = j.at("f1").get<double>();
  p.correct = j.at("correct").get<std::size_t>();
  p.predicted = j.at("predicted").get<std::size_t>();
  p.gold = j.at("gold").get<std::size_t>();
  return p;
}

nlohmann::json optional_prf(const std::optional<Prf>& p) { return p ? prf_json(*p) : nlohmann::json(nullptr); }

std::optional<Prf> optional_prf_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return prf_from_json(j.at(key));
}

}  // namespace

nlohmann::json StageReport::to_json() const {
  return {{"stage", stage},
          {"detection", prf_json(detection)},
          {"arguments", optional_prf(arguments)},
          {"long_tail", optional_prf(long_tail)},
          {"popular", optional_prf(popular)},
          {"task_f1", task_f1},
          {"type_counts", type_counts}};
}

StageReport StageReport::from_json(const nlohmann::json& j) {
  StageReport r;
  r.stage = j.at("stage").get<int>();
  r.detection = prf_from_json(j.at("detection"));
  r.arguments = optional_prf_from(j, "arguments");
  r.long_tail = optional_prf_from(j, "long_tail");
  r.popular = optional_prf_from(j, "popular");
  r.task_f1 = j.at("task_f1").get<std::vector<double>>();
  r.type_counts = j.at("type_counts").get<std::map<std::string, int>>();
  return r;
}

void write_report_csv(const std::vector<StageReport>& reports, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw EvalError("cannot write report " + path);
  out << "stage,metric,value\n" << std::setprecision(10);
  for (const auto& r : reports) {
    auto row = [&](const std::string& metric, double v) { out << r.stage << ',' << metric << ',' << v << '\n'; };
    row("detection_precision", r.detection.precision);
    row("detection_recall", r.detection.recall);
    row("detection_f1", r.detection.f1);
    if (r.arguments) {
      row("argument_precision", r.arguments->precision);
      row("argument_recall", r.arguments->recall);
      row("argument_f1", r.arguments->f1);
    }
    if (r.long_tail) row("long_tail_f1", r.long_tail->f1);
    if (r.popular) row("popular_f1", r.popular->f1);
    for (std::size_t j = 0; j < r.task_f1.size(); ++j) row("task" + std::to_string(j + 1) + "_f1", r.task_f1[j]);
  }
}

nlohmann::json summary_json(const std::vector<StageReport>& reports, const F1Matrix& matrix) {
  nlohmann::json j;
  auto stages = nlohmann::json::array();
  for (const auto& r : reports) stages.push_back(r.to_json());
  j["stages"] = std::move(stages);
  j["f1_matrix"] = matrix.to_json();
  if (matrix.tasks() >= 2 && matrix.completed_stages() == matrix.tasks()) {
    j["bwt"] = bwt(matrix);
  } else {
    j["bwt"] = nullptr;
  }
  if (!reports.empty()) {
    const auto& last = reports.back();
    j["final_detection_f1"] = last.detection.f1;
    j["final_argument_f1"] = last.arguments ? nlohmann::json(last.arguments->f1) : nlohmann::json(nullptr);
    j["final_long_tail_f1"] = last.long_tail ? nlohmann::json(last.long_tail->f1) : nlohmann::json(nullptr);
  }
  return j;
}

}  // namespace scr
