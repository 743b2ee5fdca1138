#include "scr/corpus.hpp"

#include "scr/common.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace scr {

using nlohmann::json;
using nlohmann::ordered_json;

bool EventSchema::has_type(const std::string& type) const {
  return std::find(event_types.begin(), event_types.end(), type) != event_types.end();
}

bool EventSchema::has_role(const std::string& type, const std::string& role) const {
  auto it = roles_of.find(type);
  if (it == roles_of.end()) return false;
  return std::find(it->second.begin(), it->second.end(), role) != it->second.end();
}

const std::vector<std::string>& EventSchema::roles(const std::string& type) const {
  static const std::vector<std::string> kEmpty;
  auto it = roles_of.find(type);
  return it == roles_of.end() ? kEmpty : it->second;
}

bool EventSchema::has_arguments() const {
  return std::any_of(roles_of.begin(), roles_of.end(), [](const auto& kv) { return !kv.second.empty(); });
}

namespace {

void check_span(const Span& s, std::size_t n, const std::string& what, const std::string& id) {
  if (s.start < 0 || s.end < s.start || static_cast<std::size_t>(s.end) >= n) {
    throw CorpusError("sentence '" + id + "': " + what + " [" + std::to_string(s.start) + ", " +
                      std::to_string(s.end) + "] outside [0, " + std::to_string(n) + ")");
  }
}

Span parse_span(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    throw CorpusError(std::string(what) + " must be [start, end]");
  }
  return Span{j[0].get<int>(), j[1].get<int>()};
}

ordered_json span_json(const Span& s) { return ordered_json::array({s.start, s.end}); }

}  // namespace

void validate_sentence(const TokenizedSentence& sentence, const EventSchema* schema) {
  const auto n = sentence.tokens.size();
  if (n == 0) throw CorpusError("sentence '" + sentence.id + "' has no tokens");
  std::set<std::pair<Span, std::string>> seen;
  for (const auto& ev : sentence.events) {
    check_span(ev.trigger, n, "trigger", sentence.id);
    if (ev.event_type.empty() || ev.event_type == kNoneLabel) {
      throw CorpusError("sentence '" + sentence.id + "': event type must be a schema type, not '" + ev.event_type + "'");
    }
    if (!seen.emplace(ev.trigger, ev.event_type).second) {
      throw CorpusError("sentence '" + sentence.id + "': duplicate trigger for type " + ev.event_type);
    }
    if (schema && !schema->has_type(ev.event_type)) {
      throw CorpusError("sentence '" + sentence.id + "': unknown event type '" + ev.event_type + "'");
    }
    for (const auto& arg : ev.arguments) {
      check_span(arg.span, n, "argument", sentence.id);
      if (schema && !schema->has_role(ev.event_type, arg.role)) {
        throw CorpusError("sentence '" + sentence.id + "': role '" + arg.role + "' not defined for " + ev.event_type);
      }
    }
  }
  for (const auto& e : sentence.entities) check_span(e, n, "entity", sentence.id);
}

TokenizedSentence parse_sentence_line(const std::string& line, std::size_t line_number) {
  const std::string where = "line " + std::to_string(line_number) + ": ";
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw CorpusError(where + "malformed JSON (" + e.what() + ")");
  }
  try {
    TokenizedSentence s;
    s.id = j.at("id").get<std::string>();
    s.tokens = j.at("tokens").get<std::vector<std::string>>();
    if (j.contains("events")) {
      for (const auto& ev : j.at("events")) {
        EventMention m;
        m.trigger = parse_span(ev.at("trigger"), "trigger");
        m.event_type = ev.at("type").get<std::string>();
        if (ev.contains("args")) {
          for (const auto& a : ev.at("args")) {
            m.arguments.push_back({parse_span(a.at("span"), "argument span"), a.at("role").get<std::string>()});
          }
        }
        s.events.push_back(std::move(m));
      }
    }
    if (j.contains("entities")) {
      for (const auto& e : j.at("entities")) s.entities.push_back(parse_span(e, "entity"));
    }
    return s;
  } catch (const CorpusError& e) {
    throw CorpusError(where + e.what());
  } catch (const json::exception& e) {
    throw CorpusError(where + "bad record (" + e.what() + ")");
  }
}

std::string sentence_to_json_line(const TokenizedSentence& s) {
  ordered_json j;
  j["id"] = s.id;
  j["tokens"] = s.tokens;
  auto events = ordered_json::array();
  for (const auto& ev : s.events) {
    ordered_json e;
    e["trigger"] = span_json(ev.trigger);
    e["type"] = ev.event_type;
    auto args = ordered_json::array();
    for (const auto& a : ev.arguments) {
      ordered_json aj;
      aj["span"] = span_json(a.span);
      aj["role"] = a.role;
      args.push_back(std::move(aj));
    }
    e["args"] = std::move(args);
    events.push_back(std::move(e));
  }
  j["events"] = std::move(events);
  auto ents = ordered_json::array();
  for (const auto& e : s.entities) ents.push_back(span_json(e));
  j["entities"] = std::move(ents);
  return j.dump();
}

EventSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open schema file " + path);
  try {
    json j = json::parse(in);
    EventSchema schema;
    schema.event_types = j.at("types").get<std::vector<std::string>>();
    std::set<std::string> unique(schema.event_types.begin(), schema.event_types.end());
    if (unique.size() != schema.event_types.size()) throw CorpusError("schema " + path + ": duplicate event type");
    if (j.contains("roles")) {
      for (const auto& [type, roles] : j.at("roles").items()) {
        if (!schema.has_type(type)) throw CorpusError("schema " + path + ": roles for unknown type " + type);
        schema.roles_of[type] = roles.get<std::vector<std::string>>();
      }
    }
    for (const auto& t : schema.event_types) schema.roles_of.try_emplace(t);
    return schema;
  } catch (const json::exception& e) {
    throw CorpusError("schema " + path + ": " + e.what());
  }
}

void save_schema(const EventSchema& schema, const std::string& path) {
  ordered_json j;
  j["types"] = schema.event_types;
  ordered_json roles = ordered_json::object();
  for (const auto& t : schema.event_types) roles[t] = schema.roles(t);
  j["roles"] = std::move(roles);
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write schema file " + path);
  out << j.dump(2) << '\n';
}

EventSchema infer_schema(const std::vector<TokenizedSentence>& sentences) {
  EventSchema schema;
  for (const auto& s : sentences) {
    for (const auto& ev : s.events) {
      if (!schema.has_type(ev.event_type)) {
        schema.event_types.push_back(ev.event_type);
        schema.roles_of[ev.event_type];
      }
      auto& roles = schema.roles_of[ev.event_type];
      for (const auto& a : ev.arguments) {
        if (std::find(roles.begin(), roles.end(), a.role) == roles.end()) roles.push_back(a.role);
      }
    }
  }
  return schema;
}

Corpus load_corpus(const std::string& path, const std::optional<std::string>& schema_path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file " + path);
  Corpus corpus;
  std::string line;
  std::size_t line_number = 0;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto s = parse_sentence_line(line, line_number);
    if (!ids.insert(s.id).second) throw CorpusError("line " + std::to_string(line_number) + ": duplicate id " + s.id);
    try {
      validate_sentence(s, nullptr);
    } catch (const CorpusError& e) {
      throw CorpusError("line " + std::to_string(line_number) + ": " + e.what());
    }
    corpus.sentences.push_back(std::move(s));
  }
  corpus.schema = schema_path ? load_schema(*schema_path) : infer_schema(corpus.sentences);
  for (std::size_t i = 0; i < corpus.sentences.size(); ++i) validate_sentence(corpus.sentences[i], &corpus.schema);
  return corpus;
}

void save_corpus(const std::vector<TokenizedSentence>& sentences, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write corpus file " + path);
  for (const auto& s : sentences) out << sentence_to_json_line(s) << '\n';
}

// --- synthetic ------------------------------------------------------------

std::vector<int> power_law_counts(int n_types, int max_count, int min_count) {
  if (n_types < 1 || min_count < 1 || max_count < min_count) throw CorpusError("power_law_counts: bad arguments");
  std::vector<int> counts(static_cast<std::size_t>(n_types));
  if (n_types == 1) {
    counts[0] = max_count;
    return counts;
  }
  const double exponent = std::log(static_cast<double>(max_count) / min_count) / std::log(static_cast<double>(n_types));
  for (int i = 0; i < n_types; ++i) {
    counts[static_cast<std::size_t>(i)] =
        std::max(min_count, static_cast<int>(std::lround(max_count * std::pow(i + 1.0, -exponent))));
  }
  counts.back() = min_count;
  return counts;
}

namespace {

const std::vector<std::string> kRolePool = {"Agent", "Target", "Place", "Instrument", "Time", "Beneficiary"};

struct Chunk {
  std::vector<std::string> tokens;
  int event = -1;       // owning event for triggers and arguments
  bool trigger = false;
  std::string role;     // empty for triggers and distractors
  bool entity = false;
  int entity_offset = 0;  // index of the first entity token inside the chunk
};

std::string pad2(int v) {
  std::ostringstream os;
  os << (v < 10 ? "0" : "") << v;
  return os.str();
}

}  // namespace

Corpus generate_synthetic(const SyntheticOptions& o) {
  if (o.n_types < 1) throw CorpusError("generate_synthetic: n_types must be >= 1");
  if (static_cast<int>(o.instances_per_type.size()) != o.n_types) {
    throw CorpusError("generate_synthetic: instances_per_type must have n_types entries");
  }
  for (int c : o.instances_per_type) {
    if (c <= 0) throw CorpusError("generate_synthetic: every type needs a positive instance count");
  }
  const int trigger_words = o.trigger_words_per_type * o.n_types;
  if (o.vocab_size < trigger_words + 10) {
    throw CorpusError("generate_synthetic: vocab_size too small for " + std::to_string(trigger_words) + " trigger words");
  }
  if (o.roles_per_type < 0 || o.roles_per_type > static_cast<int>(kRolePool.size())) {
    throw CorpusError("generate_synthetic: roles_per_type out of range");
  }
  if (o.min_length < 1 || o.max_length < o.min_length) throw CorpusError("generate_synthetic: bad length range");

  Rng rng(o.seed);
  Corpus corpus;
  for (int t = 0; t < o.n_types; ++t) {
    const std::string name = "Event" + pad2(t);
    corpus.schema.event_types.push_back(name);
    std::vector<std::string> pool = kRolePool;
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(static_cast<std::size_t>(o.roles_per_type));
    std::sort(pool.begin(), pool.end());
    corpus.schema.roles_of[name] = pool;
  }

  auto filler = [&](Rng& r) {
    std::uniform_int_distribution<int> d(trigger_words, o.vocab_size - 1);
    return "w" + std::to_string(d(r));
  };
  auto entity_tokens = [&](Rng& r) {
    std::uniform_int_distribution<int> word(0, o.entity_vocab - 1);
    std::bernoulli_distribution two(0.3);
    std::vector<std::string> toks{"ent" + std::to_string(word(r))};
    if (two(r)) toks.push_back("ent" + std::to_string(word(r)));
    return toks;
  };
  // Trigger words of a type get geometric weights 1, 1/2, 1/4, ...
  auto trigger_word = [&](int type, Rng& r) {
    std::vector<double> w;
    for (int k = 0; k < o.trigger_words_per_type; ++k) w.push_back(std::pow(0.5, k));
    std::discrete_distribution<int> d(w.begin(), w.end());
    return "w" + std::to_string(type * o.trigger_words_per_type + d(r));
  };

  std::vector<int> pool;
  for (int t = 0; t < o.n_types; ++t) pool.insert(pool.end(), static_cast<std::size_t>(o.instances_per_type[static_cast<std::size_t>(t)]), t);
  std::shuffle(pool.begin(), pool.end(), rng);

  std::vector<std::vector<int>> groups;
  std::bernoulli_distribution multi(o.multi_type_prob);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    std::vector<int> g{pool[i]};
    if (multi(rng)) {
      for (std::size_t j = i + 1; j < pool.size(); ++j) {
        if (pool[j] != pool[i]) {
          std::swap(pool[i + 1], pool[j]);
          g.push_back(pool[++i]);
          break;
        }
      }
    }
    groups.push_back(std::move(g));
  }
  const auto n_negative = static_cast<std::size_t>(std::lround(o.negative_ratio * static_cast<double>(groups.size())));
  for (std::size_t i = 0; i < n_negative; ++i) groups.emplace_back();
  std::shuffle(groups.begin(), groups.end(), rng);

  std::bernoulli_distribution fill_role(o.argument_prob);
  std::bernoulli_distribution add_distractor(o.distractor_prob);
  std::uniform_int_distribution<int> length(o.min_length, o.max_length);

  int sid = 0;
  for (const auto& group : groups) {
    std::vector<Chunk> chunks;
    for (std::size_t e = 0; e < group.size(); ++e) {
      const int type = group[e];
      const std::string& type_name = corpus.schema.event_types[static_cast<std::size_t>(type)];
      chunks.push_back({{trigger_word(type, rng)}, static_cast<int>(e), true, "", false, 0});
      for (const auto& role : corpus.schema.roles_of[type_name]) {
        if (!fill_role(rng)) continue;
        // Role cue word specific to (type, role) precedes the entity.
        Chunk c{{"cue_" + pad2(type) + "_" + role}, static_cast<int>(e), false, role, true, 1};
        for (auto& tok : entity_tokens(rng)) c.tokens.push_back(std::move(tok));
        chunks.push_back(std::move(c));
      }
    }
    if (add_distractor(rng)) {
      Chunk c{{"of"}, -1, false, "", true, 1};
      for (auto& tok : entity_tokens(rng)) c.tokens.push_back(std::move(tok));
      chunks.push_back(std::move(c));
    }
    const int n_filler = length(rng);
    std::vector<int> order(static_cast<std::size_t>(n_filler), -1);
    for (std::size_t c = 0; c < chunks.size(); ++c) order.push_back(static_cast<int>(c));
    std::shuffle(order.begin(), order.end(), rng);

    TokenizedSentence s;
    s.id = "s" + std::to_string(100000 + sid++).substr(1);
    s.events.resize(group.size());
    for (std::size_t e = 0; e < group.size(); ++e) {
      s.events[e].event_type = corpus.schema.event_types[static_cast<std::size_t>(group[e])];
    }
    for (int item : order) {
      const int at = static_cast<int>(s.tokens.size());
      if (item < 0) {
        s.tokens.push_back(filler(rng));
        continue;
      }
      const auto& c = chunks[static_cast<std::size_t>(item)];
      s.tokens.insert(s.tokens.end(), c.tokens.begin(), c.tokens.end());
      if (c.trigger) {
        s.events[static_cast<std::size_t>(c.event)].trigger = {at, at};
      } else if (c.entity) {
        Span span{at + c.entity_offset, at + static_cast<int>(c.tokens.size()) - 1};
        s.entities.push_back(span);
        if (c.event >= 0) s.events[static_cast<std::size_t>(c.event)].arguments.push_back({span, c.role});
      }
    }
    std::sort(s.entities.begin(), s.entities.end());
    for (auto& ev : s.events) {
      std::sort(ev.arguments.begin(), ev.arguments.end(),
                [](const ArgumentMention& a, const ArgumentMention& b) { return a.span < b.span; });
    }
    corpus.sentences.push_back(std::move(s));
  }
  for (const auto& s : corpus.sentences) validate_sentence(s, &corpus.schema);
  return corpus;
}

// --- task stream ----------------------------------------------------------

int TaskStream::task_of(const std::string& type) const {
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& ts = tasks[i].types;
    if (std::find(ts.begin(), ts.end(), type) != ts.end()) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::string> TaskStream::seen_types(int stage) const {
  if (stage < 0 || stage > size()) throw CorpusError("seen_types: stage out of range");
  std::vector<std::string> out;
  for (int i = 0; i < stage; ++i) {
    const auto& ts = tasks[static_cast<std::size_t>(i)].types;
    out.insert(out.end(), ts.begin(), ts.end());
  }
  return out;
}

TokenizedSentence restrict_to_types(const TokenizedSentence& sentence, const std::set<std::string>& types) {
  TokenizedSentence out = sentence;
  out.events.clear();
  for (const auto& ev : sentence.events) {
    if (types.count(ev.event_type)) out.events.push_back(ev);
  }
  return out;
}

namespace {

enum class Split { kTrain, kDev, kTest };

std::vector<Split> assign_splits(const std::vector<TokenizedSentence>& sentences, const EventSchema& schema,
                                 const SplitOptions& opt) {
  if (opt.dev_ratio < 0 || opt.test_ratio < 0 || opt.dev_ratio + opt.test_ratio >= 1.0) {
    throw CorpusError("split ratios must be non-negative and sum below 1");
  }
  // Stratify by the first event's type; negatives form their own stratum.
  std::map<int, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    int key = -1;
    if (!sentences[i].events.empty()) {
      const auto& t = sentences[i].events.front().event_type;
      key = static_cast<int>(std::find(schema.event_types.begin(), schema.event_types.end(), t) -
                             schema.event_types.begin());
    }
    strata[key].push_back(i);
  }
  Rng rng(opt.split_seed);
  std::vector<Split> split(sentences.size(), Split::kTrain);
  for (auto& [key, members] : strata) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto c = members.size();
    auto share = [&](double r) {
      auto n = static_cast<std::size_t>(std::lround(r * static_cast<double>(c)));
      if (key >= 0 && r > 0 && c >= 3) n = std::max<std::size_t>(n, 1);
      return n;
    };
    const std::size_t n_test = key < 0 ? 0 : share(opt.test_ratio);
    const std::size_t n_dev = key < 0 ? 0 : std::min(share(opt.dev_ratio), c - n_test);
    for (std::size_t j = 0; j < n_test; ++j) split[members[j]] = Split::kTest;
    for (std::size_t j = n_test; j < n_test + n_dev; ++j) split[members[j]] = Split::kDev;
  }
  return split;
}

}  // namespace

TaskStream partition_tasks(const EventSchema& schema, const std::vector<TokenizedSentence>& sentences, int k,
                           std::uint64_t seed, const SplitOptions& split_options) {
  const int n_types = static_cast<int>(schema.event_types.size());
  if (k < 1) throw CorpusError("partition_tasks: K must be >= 1");
  if (k > n_types) {
    throw CorpusError("partition_tasks: K=" + std::to_string(k) + " exceeds the " + std::to_string(n_types) +
                      " event types");
  }
  TaskStream stream;
  stream.schema = schema;
  stream.permutation_seed = seed;
  stream.tasks.resize(static_cast<std::size_t>(k));

  std::vector<std::string> shuffled = schema.event_types;
  Rng rng(seed);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  std::map<std::string, int> task_of;
  for (std::size_t i = 0; i < shuffled.size(); ++i) {
    const int t = static_cast<int>(i % static_cast<std::size_t>(k));
    stream.tasks[static_cast<std::size_t>(t)].types.push_back(shuffled[i]);
    task_of[shuffled[i]] = t;
  }

  const auto splits = assign_splits(sentences, schema, split_options);
  std::size_t negatives = 0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto& s = sentences[i];
    if (s.events.empty()) {
      if (splits[i] == Split::kTrain) {
        stream.tasks[negatives % static_cast<std::size_t>(k)].train.push_back({s, {}});
        ++negatives;
      }
      continue;
    }
    std::set<int> involved;
    for (const auto& ev : s.events) {
      auto it = task_of.find(ev.event_type);
      if (it == task_of.end()) throw CorpusError("partition_tasks: sentence '" + s.id + "' uses unknown type " + ev.event_type);
      involved.insert(it->second);
    }
    for (int t : involved) {
      auto& task = stream.tasks[static_cast<std::size_t>(t)];
      switch (splits[i]) {
        case Split::kTrain: {
          TrainInstance inst;
          inst.visible = s;
          inst.visible.events.clear();
          for (const auto& ev : s.events) {
            (task_of[ev.event_type] == t ? inst.visible.events : inst.masked).push_back(ev);
          }
          task.train.push_back(std::move(inst));
          break;
        }
        case Split::kDev:
          task.dev.push_back(s);
          break;
        case Split::kTest:
          task.test.push_back(s);
          break;
      }
    }
  }
  return stream;
}

namespace {

std::vector<TokenizedSentence> accumulate(const TaskStream& stream, int stage, bool test) {
  if (stage < 1 || stage > stream.size()) {
    throw CorpusError("stage " + std::to_string(stage) + " outside [1, " + std::to_string(stream.size()) + "]");
  }
  std::vector<TokenizedSentence> out;
  std::set<std::string> ids;
  for (int t = 0; t < stage; ++t) {
    const auto& part = test ? stream.tasks[static_cast<std::size_t>(t)].test : stream.tasks[static_cast<std::size_t>(t)].dev;
    for (const auto& s : part) {
      if (ids.insert(s.id).second) out.push_back(s);
    }
  }
  return out;
}

}  // namespace

std::vector<TokenizedSentence> accumulated_test(const TaskStream& stream, int stage) {
  return accumulate(stream, stage, true);
}

std::vector<TokenizedSentence> accumulated_dev(const TaskStream& stream, int stage) {
  return accumulate(stream, stage, false);
}

}  // namespace scr
