#pragma once

// Token-level training labels and the growing detection label space.

#include "scr/corpus.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace scr {

struct TokenLabel {
  std::string type = kNoneLabel;
  bool pseudo = false;
  double confidence = 1.0;  // teacher confidence for pseudo labels

  bool is_none() const { return type == kNoneLabel; }
  bool operator==(const TokenLabel&) const = default;
};

/// Sentence with one label per token, as seen by a training stage.
struct LabeledSentence {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<TokenLabel> labels;

  bool operator==(const LabeledSentence&) const = default;
};

/// Labels every token of every visible trigger span with its event type.
/// Where triggers overlap the first mention wins.
LabeledSentence label_tokens(const TokenizedSentence& visible);

/// Ordered labels; NA is fixed at index 0 and entries are only appended.
class LabelSpace {
 public:
  LabelSpace();
  explicit LabelSpace(const std::vector<std::string>& types);

  int index_of(const std::string& type) const;  // -1 when unseen
  bool contains(const std::string& type) const { return index_of(type) >= 0; }
  const std::string& label(int index) const { return labels_.at(static_cast<std::size_t>(index)); }
  int size() const { return static_cast<int>(labels_.size()); }
  /// Types without NA, in insertion order.
  std::vector<std::string> types() const;
  void add(const std::string& type);
  const std::vector<std::string>& all() const { return labels_; }

 private:
  std::vector<std::string> labels_;
};

nlohmann::json to_json(const TokenLabel& label);
TokenLabel token_label_from_json(const nlohmann::json& j);

}  // namespace scr
