#pragma once

// Argument extraction conditioned on detected events: a BIO entity tagger
// (encoder, bidirectional recurrent layer, CRF), start/end candidate
// encoding, per-event-type role heads and an argument replay memory.

#include "scr/corpus.hpp"
#include "scr/encoder.hpp"
#include "scr/nn.hpp"
#include "scr/trainer.hpp"

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace scr {

class ArgumentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- BIO / CRF ------------------------------------------------------------

enum BioTag : int { kTagO = 0, kTagB = 1, kTagI = 2 };
inline constexpr int kBioTags = 3;

/// Tags for `n` tokens; overlapping spans are rejected.
std::vector<int> bio_encode(int n, const std::vector<Span>& entities);
/// Spans of a tag sequence. A stray I (after O or at the start) opens a span.
std::vector<Span> bio_decode(const std::vector<int>& tags);

/// Negative log-likelihood of `tags` under a linear-chain CRF.
/// emissions n x T, transitions T x T (from row to column), start/end 1 x T.
ag::Var crf_nll(const ag::Var& emissions, const ag::Var& transitions, const ag::Var& start, const ag::Var& end,
                const std::vector<int>& tags);

/// Best BIO path with O->I and start->I forbidden.
std::vector<int> viterbi_decode(const Matrix& emissions, const Matrix& transitions, const Matrix& start,
                                const Matrix& end);

struct TaggerConfig {
  EncoderConfig encoder;  // defaults to a one-layer transformer
  int rnn_dim = 32;
  std::uint64_t seed = 0;

  TaggerConfig();
};

class EntityTagger {
 public:
  explicit EntityTagger(const TaggerConfig& config);
  EntityTagger clone() const;

  /// Per-token BIO scores, n x 3.
  ag::Var emissions(std::span<const std::string> tokens, Mode mode, Rng* rng) const;
  ag::Var loss(std::span<const std::string> tokens, const std::vector<Span>& entities, Mode mode, Rng* rng) const;
  /// Throws ArgumentError until the tagger has been trained.
  std::vector<Span> tag(const std::vector<std::string>& tokens) const;

  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }
  const TaggerConfig& config() const { return config_; }
  nn::ParameterList parameters() const;

 private:
  EntityTagger(const EntityTagger& other, int);

  TaggerConfig config_;
  std::unique_ptr<Encoder> encoder_;
  nn::Linear fwd_in_, bwd_in_;
  ag::Var fwd_rec_, bwd_rec_;
  nn::Linear emit_;
  ag::Var transitions_, start_, end_;
  bool trained_ = false;
};

// --- role classification --------------------------------------------------

struct ArgumentModelConfig {
  EncoderConfig encoder;
  int feature_dim = 64;
  double dropout_rate = 0.2;
  double head_init_std = 0.02;
  TaggerConfig tagger;
  std::uint64_t seed = 0;

  // Roles hinge on neighbouring tokens, so positions start as loud as tokens.
  ArgumentModelConfig() { encoder.position_init_std = 1.0; }
};

nlohmann::json to_json(const ArgumentModelConfig& config);
ArgumentModelConfig argument_config_from_json(const nlohmann::json& j);

inline const std::string kNoRole = "None";

class ArgumentModel {
 public:
  explicit ArgumentModel(const ArgumentModelConfig& config);
  ArgumentModel(ArgumentModel&&) = default;
  ArgumentModel& operator=(ArgumentModel&&) = default;
  ArgumentModel clone() const;

  /// Adds a head over {None} + roles. Existing heads are untouched.
  void add_head(const std::string& event_type, const std::vector<std::string>& roles, Rng& rng);
  bool has_head(const std::string& event_type) const { return heads_.count(event_type) > 0; }
  /// Head labels with None at index 0.
  const std::vector<std::string>& head_labels(const std::string& event_type) const;
  std::vector<std::string> head_types() const;

  ag::Var features(std::span<const std::string> tokens, Mode mode, Rng* rng) const;
  /// Role distribution for each candidate span, |spans| x (|roles| + 1).
  ag::Var role_probs(const ag::Var& features, const std::vector<Span>& spans, const std::string& event_type) const;

  EntityTagger& tagger() { return tagger_; }
  const EntityTagger& tagger() const { return tagger_; }
  const ArgumentModelConfig& config() const { return config_; }
  nn::ParameterList parameters() const;

  void save(const std::string& path) const;
  static ArgumentModel load(const std::string& path);

 private:
  ArgumentModel(const ArgumentModel& other, int);

  ArgumentModelConfig config_;
  std::unique_ptr<Encoder> encoder_;
  FeatureProjector projector_;
  EntityTagger tagger_;
  std::map<std::string, nn::Linear> heads_;
  std::map<std::string, std::vector<std::string>> head_labels_;
};

/// [f_start ; f_end] for one span.
ag::Var encode_candidate(const ag::Var& features, const Span& span);
Matrix encode_candidate(const Matrix& features, const Span& span);

/// Mean cross-entropy over candidates; labels index the head's label list.
ag::Var role_loss(const ag::Var& role_probs, std::span<const int> gold);
double role_loss(const Matrix& role_probs, std::span<const int> gold);

/// Fills `arguments` of every detected event: each tagged entity takes its
/// argmax role under that event type's head; None is dropped.
std::vector<EventMention> extract_arguments(const ArgumentModel& model, const std::vector<std::string>& tokens,
                                            const std::vector<EventMention>& detected);

// --- argument memory ------------------------------------------------------

struct ArgumentExemplar {
  std::string sentence_id;
  std::string event_type;
  int stage = 0;
  TokenizedSentence sentence;  // restricted to the exemplar's event type

  bool operator==(const ArgumentExemplar&) const = default;
};

class ArgumentMemory {
 public:
  explicit ArgumentMemory(int capacity_per_type = 10);

  int capacity() const { return capacity_; }
  void update(const std::map<std::string, std::vector<ArgumentExemplar>>& selections);
  const std::vector<ArgumentExemplar>& exemplars(const std::string& type) const;
  std::size_t total() const;
  std::vector<std::string> types() const;

  nlohmann::json to_json() const;
  static ArgumentMemory from_json(const nlohmann::json& j);

 private:
  int capacity_;
  std::map<std::string, std::vector<ArgumentExemplar>> by_type_;
};

struct ArgumentTrainOptions {
  int tagger_epochs = 6;
  int epochs = 8;
  int batch_size = 8;
  nn::AdamOptions adam;
  int memory_size = 10;
  std::uint64_t seed = 0;
};

struct ArgumentStageLog {
  int stage = 0;
  std::vector<EpochLog> curve;
};

/// Trains the tagger and the role heads of `types` (heads are added when
/// missing) on `train` plus the replayed memory, then stores exemplars of
/// `types` in `memory`.
ArgumentStageLog train_argument_task(ArgumentModel& model, const std::vector<TokenizedSentence>& train,
                                     const std::vector<std::string>& types, const EventSchema& schema,
                                     ArgumentMemory& memory, const ArgumentTrainOptions& options, int stage);

/// Argument predictions on top of detection output.
std::vector<TokenizedSentence> extract_all(const ArgumentModel& model, const std::vector<TokenizedSentence>& detected);

}  // namespace scr
