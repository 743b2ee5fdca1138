#include "scr/detection.hpp"

#include "scr/checkpoint.hpp"

#include <stdexcept>

namespace scr {

nlohmann::json to_json(const DetectionModelConfig& c) {
  return {{"encoder", to_json(c.encoder)},
          {"feature_dim", c.feature_dim},
          {"dropout_rate", c.dropout_rate},
          {"row_init_std", c.row_init_std},
          {"seed", c.seed}};
}

DetectionModelConfig detection_config_from_json(const nlohmann::json& j) {
  DetectionModelConfig c;
  c.encoder = encoder_config_from_json(j.at("encoder"));
  c.feature_dim = j.at("feature_dim").get<int>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.row_init_std = j.at("row_init_std").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

DetectionModel::DetectionModel(const DetectionModelConfig& config) : config_(config) {
  if (config.feature_dim < 1) throw std::invalid_argument("feature_dim must be >= 1");
  EncoderConfig enc = config.encoder;
  enc.seed = derive_seed(config.seed, "detection-encoder");
  encoder_ = make_encoder(enc);
  Rng rng(derive_seed(config.seed, "detection-head"));
  projector_ = FeatureProjector(enc.d, config.feature_dim, config.dropout_rate, rng);
  classifier_.weight = nn::make_parameter(nn::normal_matrix(config.feature_dim, 1, config.row_init_std, rng));
  classifier_.bias = nn::make_parameter(Matrix::Zero(1, 1));
}

DetectionModel DetectionModel::clone() const {
  DetectionModel copy(*this, 0);
  return copy;
}

DetectionModel::DetectionModel(const DetectionModel& other, int)
    : config_(other.config_),
      encoder_(other.encoder_->clone()),
      projector_(other.projector_.clone()),
      classifier_(other.classifier_.clone()),
      labels_(other.labels_) {}

DetectionModel::Pass DetectionModel::encode(std::span<const std::string> tokens, Mode mode, Rng* rng) const {
  Pass pass;
  pass.encoded = encoder_->forward(tokens, mode, rng);
  pass.features = projector_.forward(pass.encoded.hidden, mode, rng);
  return pass;
}

ag::Var DetectionModel::classify(const ag::Var& features) const {
  return ag::softmax_rows(classifier_.forward(features));
}

void DetectionModel::widen(const std::vector<std::string>& new_types, Rng& rng) {
  if (new_types.empty()) return;
  for (const auto& t : new_types) {
    if (labels_.contains(t)) throw std::invalid_argument("widen: type " + t + " already in the label space");
  }
  const auto h = classifier_.weight.rows();
  const auto old_cols = classifier_.weight.cols();
  const auto add = static_cast<Eigen::Index>(new_types.size());
  Matrix w(h, old_cols + add);
  w.leftCols(old_cols) = classifier_.weight.value();
  w.rightCols(add) = nn::normal_matrix(h, add, config_.row_init_std, rng);
  Matrix b = Matrix::Zero(1, old_cols + add);
  b.leftCols(old_cols) = classifier_.bias.value();
  classifier_.weight = nn::make_parameter(std::move(w));
  classifier_.bias = nn::make_parameter(std::move(b));
  for (const auto& t : new_types) labels_.add(t);
}

nn::ParameterList DetectionModel::parameters() const {
  nn::ParameterList out;
  for (auto& p : encoder_->parameters()) out.push_back({"encoder." + p.name, p.var});
  projector_.collect("projector", out);
  classifier_.collect("classifier", out);
  return out;
}

std::vector<Matrix> DetectionModel::parameter_values() const {
  std::vector<Matrix> out;
  for (const auto& p : parameters()) out.push_back(p.var.value());
  return out;
}

void DetectionModel::set_parameter_values(const std::vector<Matrix>& values) {
  auto params = parameters();
  if (params.size() != values.size()) throw std::invalid_argument("set_parameter_values: count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].var.rows() != values[i].rows() || params[i].var.cols() != values[i].cols()) {
      throw std::invalid_argument("set_parameter_values: shape mismatch for " + params[i].name);
    }
    params[i].var.mutable_value() = values[i];
  }
}

void DetectionModel::save(const std::string& path) const {
  Checkpoint ck;
  ck.metadata["format"] = "detection";
  ck.metadata["config"] = to_json(config_);
  ck.metadata["labels"] = labels_.all();
  for (const auto& p : parameters()) ck.tensors.emplace_back(p.name, p.var.value());
  write_checkpoint(path, ck);
}

DetectionModel DetectionModel::load(const std::string& path) {
  const Checkpoint ck = read_checkpoint(path);
  if (ck.metadata.value("format", "") != "detection") throw CheckpointError(path + " is not a detection checkpoint");
  DetectionModel model(detection_config_from_json(ck.metadata.at("config")));
  const auto labels = ck.metadata.at("labels").get<std::vector<std::string>>();
  if (labels.empty() || labels.front() != kNoneLabel) throw CheckpointError(path + ": label space must start with NA");
  Rng unused(0);
  model.widen({labels.begin() + 1, labels.end()}, unused);
  load_parameters(model.parameters(), ck.tensors);
  return model;
}

Matrix classify_tokens(const DetectionModel& model, const std::vector<std::string>& tokens) {
  ag::NoGradGuard guard;
  return model.classify(model.encode(tokens, Mode::kEval, nullptr).features).value();
}

Matrix token_features(const DetectionModel& model, const std::vector<std::string>& tokens) {
  ag::NoGradGuard guard;
  return model.encode(tokens, Mode::kEval, nullptr).features.value();
}

std::vector<EventMention> decode_triggers(const Matrix& probs, const LabelSpace& labels) {
  if (probs.cols() != labels.size()) throw std::invalid_argument("decode_triggers: width differs from label space");
  std::vector<EventMention> out;
  int prev = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index best = 0;
    probs.row(i).maxCoeff(&best);
    const int label = static_cast<int>(best);
    if (label != 0 && label == prev && !out.empty() && out.back().trigger.end == i - 1) {
      out.back().trigger.end = static_cast<int>(i);
    } else if (label != 0) {
      out.push_back({{static_cast<int>(i), static_cast<int>(i)}, labels.label(label), {}});
    }
    prev = label;
  }
  return out;
}

TokenizedSentence predict_events(const DetectionModel& model, const TokenizedSentence& sentence) {
  TokenizedSentence out;
  out.id = sentence.id;
  out.tokens = sentence.tokens;
  out.entities = sentence.entities;
  out.events = decode_triggers(classify_tokens(model, sentence.tokens), model.labels());
  return out;
}

// --- pseudo labels --------------------------------------------------------

nlohmann::json PseudoLabelRecord::to_json() const {
  return {{"sentence_id", sentence_id}, {"token", token},   {"word", word}, {"type", type},
          {"confidence", confidence},   {"source", source}, {"stage", stage}};
}

std::vector<int> apply_pseudo_labels(LabeledSentence& sentence, const Matrix& probs, const LabelSpace& labels,
                                     double tau) {
  if (tau <= 0.0 || tau > 1.0) throw std::invalid_argument("pseudo-label threshold must lie in (0, 1]");
  if (probs.rows() != static_cast<Eigen::Index>(sentence.labels.size()) || probs.cols() != labels.size()) {
    throw std::invalid_argument("apply_pseudo_labels: probability matrix does not match sentence/labels");
  }
  std::vector<int> changed;
  if (labels.size() < 2) return changed;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    auto& l = sentence.labels[static_cast<std::size_t>(i)];
    if (!l.is_none()) continue;
    Eigen::Index best = 0;
    const double conf = probs.row(i).tail(probs.cols() - 1).maxCoeff(&best);
    if (conf >= tau) {
      l = TokenLabel{labels.label(static_cast<int>(best) + 1), true, conf};
      changed.push_back(static_cast<int>(i));
    }
  }
  return changed;
}

std::vector<LabeledSentence> augment_with_pseudo_labels(const std::vector<LabeledSentence>& data,
                                                        const ModelSnapshot& teacher, const PseudoLabelConfig& config,
                                                        std::vector<PseudoLabelRecord>* audit, int stage) {
  std::vector<LabeledSentence> out = data;
  for (auto& s : out) {
    const std::vector<LabeledSentence>::size_type before_gold = s.labels.size();
    std::vector<TokenLabel> gold = s.labels;
    const auto changed = apply_pseudo_labels(s, teacher.probabilities(s.tokens), teacher.model().labels(), config.tau);
    for (std::size_t i = 0; i < before_gold; ++i) {
      if (!gold[i].is_none() && !(s.labels[i] == gold[i])) throw std::logic_error("pseudo label overwrote a gold label");
    }
    if (audit) {
      for (int t : changed) {
        const auto& l = s.labels[static_cast<std::size_t>(t)];
        audit->push_back({s.id, t, s.tokens[static_cast<std::size_t>(t)], l.type, l.confidence, "train", stage});
      }
    }
  }
  return out;
}

}  // namespace scr
