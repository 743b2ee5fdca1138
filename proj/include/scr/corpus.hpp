#pragma once

// Annotated sentences, corpus IO, the synthetic corpus generator, and the
// split of a corpus into a stream of tasks over disjoint event types.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace scr {

inline constexpr const char* kNoneLabel = "NA";

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Token range, both ends inclusive.
struct Span {
  int start = 0;
  int end = 0;

  int length() const { return end - start + 1; }
  auto operator<=>(const Span&) const = default;
};

struct ArgumentMention {
  Span span;
  std::string role;

  bool operator==(const ArgumentMention&) const = default;
};

struct EventMention {
  Span trigger;
  std::string event_type;
  std::vector<ArgumentMention> arguments;

  bool operator==(const EventMention&) const = default;
};

struct TokenizedSentence {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<EventMention> events;
  std::vector<Span> entities;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const TokenizedSentence&) const = default;
};

struct EventSchema {
  std::vector<std::string> event_types;
  std::map<std::string, std::vector<std::string>> roles_of;

  bool has_type(const std::string& type) const;
  bool has_role(const std::string& type, const std::string& role) const;
  const std::vector<std::string>& roles(const std::string& type) const;
  bool has_arguments() const;
  bool operator==(const EventSchema&) const = default;
};

struct Corpus {
  EventSchema schema;
  std::vector<TokenizedSentence> sentences;
};

// --- IO -------------------------------------------------------------------

/// Checks offsets and (span, type) uniqueness; with a schema, also type/role membership.
void validate_sentence(const TokenizedSentence& sentence, const EventSchema* schema);

TokenizedSentence parse_sentence_line(const std::string& line, std::size_t line_number);
std::string sentence_to_json_line(const TokenizedSentence& sentence);

EventSchema load_schema(const std::string& path);
void save_schema(const EventSchema& schema, const std::string& path);

/// Reads a JSON-lines corpus. Without a schema file the schema is inferred
/// from the mentions in order of first appearance.
Corpus load_corpus(const std::string& path, const std::optional<std::string>& schema_path = std::nullopt);
void save_corpus(const std::vector<TokenizedSentence>& sentences, const std::string& path);

EventSchema infer_schema(const std::vector<TokenizedSentence>& sentences);

// --- synthetic data -------------------------------------------------------

struct SyntheticOptions {
  int n_types = 20;
  std::vector<int> instances_per_type;
  int vocab_size = 400;
  std::uint64_t seed = 7;
  double multi_type_prob = 0.2;   // chance a sentence carries a second event of another type
  double negative_ratio = 0.25;   // all-NA sentences per positive sentence
  int roles_per_type = 2;
  double argument_prob = 0.8;     // chance each role of an event is filled
  double distractor_prob = 0.4;   // chance of a non-argument entity per sentence
  int min_length = 8;             // filler tokens per sentence
  int max_length = 14;
  int trigger_words_per_type = 3;
  int entity_vocab = 120;
};

/// Power-law instance counts from `max_count` down to `min_count`, decreasing.
std::vector<int> power_law_counts(int n_types, int max_count, int min_count);

Corpus generate_synthetic(const SyntheticOptions& options);

// --- task stream ----------------------------------------------------------

struct SplitOptions {
  double dev_ratio = 0.15;
  double test_ratio = 0.15;
  std::uint64_t split_seed = 0;
};

/// A train-view sentence: `visible` exposes only the task's own event types;
/// `masked` keeps the gold mentions hidden from it.
struct TrainInstance {
  TokenizedSentence visible;
  std::vector<EventMention> masked;
};

struct TaskData {
  std::vector<std::string> types;
  std::vector<TrainInstance> train;
  std::vector<TokenizedSentence> dev;
  std::vector<TokenizedSentence> test;
};

struct TaskStream {
  EventSchema schema;
  std::vector<TaskData> tasks;
  std::uint64_t permutation_seed = 0;

  int size() const { return static_cast<int>(tasks.size()); }
  /// 0-based task index that introduces `type`.
  int task_of(const std::string& type) const;
  /// Types of tasks 1..stage (1-based stage), in task order.
  std::vector<std::string> seen_types(int stage) const;
};

TaskStream partition_tasks(const EventSchema& schema, const std::vector<TokenizedSentence>& sentences, int k,
                           std::uint64_t seed, const SplitOptions& split = {});

/// Union of test views of tasks 1..stage, deduplicated by sentence id.
std::vector<TokenizedSentence> accumulated_test(const TaskStream& stream, int stage);
std::vector<TokenizedSentence> accumulated_dev(const TaskStream& stream, int stage);

/// Copy with only the events whose type is in `types`.
TokenizedSentence restrict_to_types(const TokenizedSentence& sentence, const std::set<std::string>& types);

}  // namespace scr
