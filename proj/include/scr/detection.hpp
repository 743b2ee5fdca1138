#pragma once

// Event detection model: a contextual encoder, the feature projector, and a
// linear softmax classifier over the seen types plus NA that widens as new
// types arrive. Frozen snapshots act as distillation and pseudo-label
// teachers.

#include "scr/corpus.hpp"
#include "scr/encoder.hpp"
#include "scr/labels.hpp"
#include "scr/nn.hpp"

#include <memory>
#include <string>
#include <vector>

namespace scr {

struct DetectionModelConfig {
  EncoderConfig encoder;
  int feature_dim = 512;
  double dropout_rate = 0.2;   // projector dropout
  double row_init_std = 0.02;  // new classifier columns
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const DetectionModelConfig& config);
DetectionModelConfig detection_config_from_json(const nlohmann::json& j);

class DetectionModel {
 public:
  struct Pass {
    EncoderGraph encoded;
    ag::Var features;  // projected, before any long-tail enhancement
  };

  explicit DetectionModel(const DetectionModelConfig& config);
  DetectionModel(const DetectionModel&) = delete;
  DetectionModel& operator=(const DetectionModel&) = delete;
  DetectionModel(DetectionModel&&) = default;
  DetectionModel& operator=(DetectionModel&&) = default;

  /// Deep copy with independent parameters.
  DetectionModel clone() const;

  Pass encode(std::span<const std::string> tokens, Mode mode, Rng* rng) const;
  /// Softmax over the label space for each feature row.
  ag::Var classify(const ag::Var& features) const;

  /// Appends types to the label space. New classifier columns are drawn from
  /// N(0, row_init_std^2); existing columns are untouched.
  void widen(const std::vector<std::string>& new_types, Rng& rng);

  const LabelSpace& labels() const { return labels_; }
  const DetectionModelConfig& config() const { return config_; }
  const Encoder& encoder() const { return *encoder_; }
  const FeatureProjector& projector() const { return projector_; }
  nn::Linear& classifier() { return classifier_; }
  const nn::Linear& classifier() const { return classifier_; }

  nn::ParameterList parameters() const;
  std::vector<Matrix> parameter_values() const;
  void set_parameter_values(const std::vector<Matrix>& values);

  void save(const std::string& path) const;
  static DetectionModel load(const std::string& path);

 private:
  DetectionModel(const DetectionModel& other, int);  // deep copy

  DetectionModelConfig config_;
  std::unique_ptr<Encoder> encoder_;
  FeatureProjector projector_;
  nn::Linear classifier_;
  LabelSpace labels_;
};

/// Evaluation-mode token probabilities, [n_tokens x |labels|].
Matrix classify_tokens(const DetectionModel& model, const std::vector<std::string>& tokens);
Matrix token_features(const DetectionModel& model, const std::vector<std::string>& tokens);

/// Argmax decoding; consecutive tokens with the same non-NA type merge into one trigger.
std::vector<EventMention> decode_triggers(const Matrix& probs, const LabelSpace& labels);
TokenizedSentence predict_events(const DetectionModel& model, const TokenizedSentence& sentence);

/// Immutable deep copy of a model taken at the end of a stage.
class ModelSnapshot {
 public:
  explicit ModelSnapshot(const DetectionModel& model) : model_(model.clone()) {}
  const DetectionModel& model() const { return model_; }
  Matrix probabilities(const std::vector<std::string>& tokens) const { return classify_tokens(model_, tokens); }

 private:
  DetectionModel model_;
};

// --- pseudo labels --------------------------------------------------------

struct PseudoLabelConfig {
  double tau = 0.8;
};

struct PseudoLabelRecord {
  std::string sentence_id;
  int token = 0;
  std::string word;
  std::string type;
  double confidence = 0.0;
  std::string source;  // "train" or "memory"
  int stage = 0;

  nlohmann::json to_json() const;
};

/// Core rule on one sentence given teacher probabilities: every NA token
/// whose highest non-NA probability reaches `tau` takes that type as a
/// pseudo label. Gold and existing pseudo labels are kept. Returns the
/// relabeled token positions.
std::vector<int> apply_pseudo_labels(LabeledSentence& sentence, const Matrix& probs, const LabelSpace& labels,
                                     double tau);

std::vector<LabeledSentence> augment_with_pseudo_labels(const std::vector<LabeledSentence>& data,
                                                        const ModelSnapshot& teacher, const PseudoLabelConfig& config,
                                                        std::vector<PseudoLabelRecord>* audit = nullptr,
                                                        int stage = 0);

}  // namespace scr
