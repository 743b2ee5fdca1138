#include "scr/labels.hpp"

#include <algorithm>
#include <stdexcept>

namespace scr {

LabeledSentence label_tokens(const TokenizedSentence& visible) {
  LabeledSentence out;
  out.id = visible.id;
  out.tokens = visible.tokens;
  out.labels.assign(visible.tokens.size(), TokenLabel{});
  for (const auto& ev : visible.events) {
    for (int t = ev.trigger.start; t <= ev.trigger.end; ++t) {
      auto& l = out.labels.at(static_cast<std::size_t>(t));
      if (l.is_none()) l = TokenLabel{ev.event_type, false, 1.0};
    }
  }
  return out;
}

LabelSpace::LabelSpace() : labels_{kNoneLabel} {}

LabelSpace::LabelSpace(const std::vector<std::string>& types) : LabelSpace() {
  for (const auto& t : types) add(t);
}

int LabelSpace::index_of(const std::string& type) const {
  auto it = std::find(labels_.begin(), labels_.end(), type);
  return it == labels_.end() ? -1 : static_cast<int>(it - labels_.begin());
}

std::vector<std::string> LabelSpace::types() const { return {labels_.begin() + 1, labels_.end()}; }

void LabelSpace::add(const std::string& type) {
  if (type.empty() || type == kNoneLabel) throw std::invalid_argument("label space: '" + type + "' is not an event type");
  if (contains(type)) throw std::invalid_argument("label space already contains " + type);
  labels_.push_back(type);
}

nlohmann::json to_json(const TokenLabel& label) {
  return {{"type", label.type}, {"pseudo", label.pseudo}, {"confidence", label.confidence}};
}

TokenLabel token_label_from_json(const nlohmann::json& j) {
  return {j.at("type").get<std::string>(), j.at("pseudo").get<bool>(), j.at("confidence").get<double>()};
}

}  // namespace scr
