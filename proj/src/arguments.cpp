#include "scr/arguments.hpp"

#include "scr/checkpoint.hpp"
#include "scr/losses.hpp"
#include "scr/memory.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace scr {

// --- BIO / CRF ------------------------------------------------------------

std::vector<int> bio_encode(int n, const std::vector<Span>& entities) {
  std::vector<int> tags(static_cast<std::size_t>(n), kTagO);
  for (const auto& e : entities) {
    if (e.start < 0 || e.end >= n || e.start > e.end) throw ArgumentError("entity span outside the sentence");
    for (int t = e.start; t <= e.end; ++t) {
      if (tags[static_cast<std::size_t>(t)] != kTagO) throw ArgumentError("overlapping entity spans");
      tags[static_cast<std::size_t>(t)] = t == e.start ? kTagB : kTagI;
    }
  }
  return tags;
}

std::vector<Span> bio_decode(const std::vector<int>& tags) {
  std::vector<Span> out;
  for (int t = 0; t < static_cast<int>(tags.size()); ++t) {
    const int tag = tags[static_cast<std::size_t>(t)];
    if (tag == kTagB || (tag == kTagI && (out.empty() || out.back().end != t - 1))) {
      out.push_back({t, t});
    } else if (tag == kTagI) {
      out.back().end = t;
    }
  }
  return out;
}

namespace {

double logsumexp(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

constexpr double kForbidden = -1e30;

}  // namespace

ag::Var crf_nll(const ag::Var& emissions, const ag::Var& transitions, const ag::Var& start, const ag::Var& end,
                const std::vector<int>& tags) {
  const Matrix& em = emissions.value();
  const Matrix& tr = transitions.value();
  const auto n = em.rows();
  const auto k = em.cols();
  if (n == 0) throw ArgumentError("crf_nll: empty sentence");
  if (static_cast<Eigen::Index>(tags.size()) != n) throw ArgumentError("crf_nll: one tag per token required");
  if (tr.rows() != k || tr.cols() != k || start.cols() != k || end.cols() != k) {
    throw ArgumentError("crf_nll: parameter shapes do not match the tag count");
  }
  for (int t : tags) {
    if (t < 0 || t >= k) throw ArgumentError("crf_nll: tag out of range");
  }
  Matrix alpha(n, k);
  alpha.row(0) = start.value().row(0) + em.row(0);
  for (Eigen::Index t = 1; t < n; ++t) {
    for (Eigen::Index j = 0; j < k; ++j) alpha(t, j) = logsumexp(alpha.row(t - 1) + tr.col(j).transpose()) + em(t, j);
  }
  const double log_z = logsumexp(alpha.row(n - 1) + end.value().row(0));
  double gold = start.value()(0, tags[0]) + end.value()(0, tags.back());
  for (Eigen::Index t = 0; t < n; ++t) {
    gold += em(t, tags[static_cast<std::size_t>(t)]);
    if (t > 0) gold += tr(tags[static_cast<std::size_t>(t - 1)], tags[static_cast<std::size_t>(t)]);
  }
  Matrix out(1, 1);
  out(0, 0) = log_z - gold;
  return ag::make_op(std::move(out), {emissions, transitions, start, end}, [alpha, log_z, tags](ag::Node& node) {
    const Matrix& em = node.inputs[0]->value;
    const Matrix& tr = node.inputs[1]->value;
    const Matrix& en = node.inputs[3]->value;
    const auto n = em.rows();
    const auto k = em.cols();
    const double g = node.grad(0, 0);
    Matrix beta(n, k);
    beta.row(n - 1) = en.row(0);
    for (Eigen::Index t = n - 2; t >= 0; --t) {
      for (Eigen::Index i = 0; i < k; ++i) beta(t, i) = logsumexp(tr.row(i) + em.row(t + 1) + beta.row(t + 1));
    }
    Matrix d_em = ((alpha + beta).array() - log_z).exp().matrix();
    Matrix d_tr = Matrix::Zero(k, k);
    for (Eigen::Index t = 0; t + 1 < n; ++t) {
      for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
          d_tr(i, j) += std::exp(alpha(t, i) + tr(i, j) + em(t + 1, j) + beta(t + 1, j) - log_z);
        }
      }
    }
    Matrix d_start = d_em.row(0);
    Matrix d_end = d_em.row(n - 1);
    for (Eigen::Index t = 0; t < n; ++t) {
      const int y = tags[static_cast<std::size_t>(t)];
      d_em(t, y) -= 1.0;
      if (t > 0) d_tr(tags[static_cast<std::size_t>(t - 1)], y) -= 1.0;
    }
    d_start(0, tags.front()) -= 1.0;
    d_end(0, tags.back()) -= 1.0;
    const ag::Node* nodes[] = {node.inputs[0].get(), node.inputs[1].get(), node.inputs[2].get(), node.inputs[3].get()};
    const Matrix* grads[] = {&d_em, &d_tr, &d_start, &d_end};
    for (int p = 0; p < 4; ++p) {
      if (nodes[p]->requires_grad) node.inputs[static_cast<std::size_t>(p)]->accumulate(g * *grads[p]);
    }
  });
}

std::vector<int> viterbi_decode(const Matrix& emissions, const Matrix& transitions, const Matrix& start,
                                const Matrix& end) {
  const auto n = emissions.rows();
  const auto k = emissions.cols();
  if (k != kBioTags) throw ArgumentError("viterbi_decode expects BIO emissions");
  if (n == 0) return {};
  Matrix tr = transitions;
  tr(kTagO, kTagI) = kForbidden;
  Matrix st = start;
  st(0, kTagI) = kForbidden;
  Matrix score(n, k);
  Eigen::MatrixXi back(n, k);
  score.row(0) = st.row(0) + emissions.row(0);
  for (Eigen::Index t = 1; t < n; ++t) {
    for (Eigen::Index j = 0; j < k; ++j) {
      Eigen::Index best = 0;
      const double s = (score.row(t - 1) + tr.col(j).transpose()).maxCoeff(&best);
      score(t, j) = s + emissions(t, j);
      back(t, j) = static_cast<int>(best);
    }
  }
  Eigen::Index last = 0;
  (score.row(n - 1) + end.row(0)).maxCoeff(&last);
  std::vector<int> tags(static_cast<std::size_t>(n));
  tags.back() = static_cast<int>(last);
  for (Eigen::Index t = n - 1; t > 0; --t) {
    tags[static_cast<std::size_t>(t - 1)] = back(t, tags[static_cast<std::size_t>(t)]);
  }
  return tags;
}

TaggerConfig::TaggerConfig() {
  encoder.n_layers = 1;
  encoder.attention_layers = 1;
  encoder.dropout_rate = 0.1;
}

EntityTagger::EntityTagger(const TaggerConfig& config) : config_(config) {
  EncoderConfig enc = config.encoder;
  enc.seed = derive_seed(config.seed, "tagger-encoder");
  encoder_ = make_encoder(enc);
  Rng rng(derive_seed(config.seed, "tagger"));
  const int d = enc.d;
  const int r = config.rnn_dim;
  const double in_std = 1.0 / std::sqrt(static_cast<double>(d));
  const double rec_std = 1.0 / std::sqrt(static_cast<double>(r));
  fwd_in_ = nn::Linear(d, r, in_std, rng);
  fwd_rec_ = nn::make_parameter(nn::normal_matrix(r, r, rec_std, rng));
  bwd_in_ = nn::Linear(d, r, in_std, rng);
  bwd_rec_ = nn::make_parameter(nn::normal_matrix(r, r, rec_std, rng));
  emit_ = nn::Linear(2 * r, kBioTags, 1.0 / std::sqrt(2.0 * r), rng);
  transitions_ = nn::make_parameter(Matrix::Zero(kBioTags, kBioTags));
  start_ = nn::make_parameter(Matrix::Zero(1, kBioTags));
  end_ = nn::make_parameter(Matrix::Zero(1, kBioTags));
}

EntityTagger::EntityTagger(const EntityTagger& o, int)
    : config_(o.config_),
      encoder_(o.encoder_->clone()),
      fwd_in_(o.fwd_in_.clone()),
      bwd_in_(o.bwd_in_.clone()),
      fwd_rec_(nn::clone_parameter(o.fwd_rec_)),
      bwd_rec_(nn::clone_parameter(o.bwd_rec_)),
      emit_(o.emit_.clone()),
      transitions_(nn::clone_parameter(o.transitions_)),
      start_(nn::clone_parameter(o.start_)),
      end_(nn::clone_parameter(o.end_)),
      trained_(o.trained_) {}

EntityTagger EntityTagger::clone() const { return EntityTagger(*this, 0); }

ag::Var EntityTagger::emissions(std::span<const std::string> tokens, Mode mode, Rng* rng) const {
  const ag::Var h = encoder_->forward(tokens, mode, rng).hidden;
  const auto n = h.rows();
  auto run = [&](const nn::Linear& in, const ag::Var& rec, bool reverse) {
    const ag::Var x = in.forward(h);
    std::vector<ag::Var> states(static_cast<std::size_t>(n));
    ag::Var prev;
    for (Eigen::Index s = 0; s < n; ++s) {
      const Eigen::Index t = reverse ? n - 1 - s : s;
      ag::Var pre = ag::slice_rows(x, t, 1);
      if (prev.defined()) pre = ag::add(pre, ag::matmul(prev, rec));
      prev = ag::tanh(pre);
      states[static_cast<std::size_t>(t)] = prev;
    }
    return ag::concat_rows(states);
  };
  const std::vector<ag::Var> both{run(fwd_in_, fwd_rec_, false), run(bwd_in_, bwd_rec_, true)};
  return emit_.forward(ag::concat_cols(both));
}

ag::Var EntityTagger::loss(std::span<const std::string> tokens, const std::vector<Span>& entities, Mode mode,
                           Rng* rng) const {
  return crf_nll(emissions(tokens, mode, rng), transitions_, start_, end_,
                 bio_encode(static_cast<int>(tokens.size()), entities));
}

std::vector<Span> EntityTagger::tag(const std::vector<std::string>& tokens) const {
  if (!trained_) throw ArgumentError("entity tagger has not been trained");
  ag::NoGradGuard guard;
  const Matrix em = emissions(tokens, Mode::kEval, nullptr).value();
  return bio_decode(viterbi_decode(em, transitions_.value(), start_.value(), end_.value()));
}

nn::ParameterList EntityTagger::parameters() const {
  nn::ParameterList out;
  for (auto& p : encoder_->parameters()) out.push_back({"encoder." + p.name, p.var});
  fwd_in_.collect("fwd_in", out);
  out.push_back({"fwd_rec", fwd_rec_});
  bwd_in_.collect("bwd_in", out);
  out.push_back({"bwd_rec", bwd_rec_});
  emit_.collect("emit", out);
  out.push_back({"transitions", transitions_});
  out.push_back({"start", start_});
  out.push_back({"end", end_});
  return out;
}

// --- role classification --------------------------------------------------

nlohmann::json to_json(const ArgumentModelConfig& c) {
  return {{"encoder", to_json(c.encoder)},
          {"feature_dim", c.feature_dim},
          {"dropout_rate", c.dropout_rate},
          {"head_init_std", c.head_init_std},
          {"tagger", {{"encoder", to_json(c.tagger.encoder)}, {"rnn_dim", c.tagger.rnn_dim}, {"seed", c.tagger.seed}}},
          {"seed", c.seed}};
}

ArgumentModelConfig argument_config_from_json(const nlohmann::json& j) {
  ArgumentModelConfig c;
  c.encoder = encoder_config_from_json(j.at("encoder"));
  c.feature_dim = j.at("feature_dim").get<int>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.head_init_std = j.at("head_init_std").get<double>();
  const auto& t = j.at("tagger");
  c.tagger.encoder = encoder_config_from_json(t.at("encoder"));
  c.tagger.rnn_dim = t.at("rnn_dim").get<int>();
  c.tagger.seed = t.at("seed").get<std::uint64_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

namespace {

TaggerConfig seeded_tagger(TaggerConfig t, std::uint64_t seed) {
  t.seed = derive_seed(seed, "tagger", t.seed);
  return t;
}

}  // namespace

ArgumentModel::ArgumentModel(const ArgumentModelConfig& config)
    : config_(config), tagger_(seeded_tagger(config.tagger, config.seed)) {
  EncoderConfig enc = config.encoder;
  enc.seed = derive_seed(config.seed, "argument-encoder");
  encoder_ = make_encoder(enc);
  Rng rng(derive_seed(config.seed, "argument-projector"));
  projector_ = FeatureProjector(enc.d, config.feature_dim, config.dropout_rate, rng);
}

ArgumentModel::ArgumentModel(const ArgumentModel& o, int)
    : config_(o.config_),
      encoder_(o.encoder_->clone()),
      projector_(o.projector_.clone()),
      tagger_(o.tagger_.clone()),
      head_labels_(o.head_labels_) {
  for (const auto& [type, head] : o.heads_) heads_.emplace(type, head.clone());
}

ArgumentModel ArgumentModel::clone() const { return ArgumentModel(*this, 0); }

void ArgumentModel::add_head(const std::string& event_type, const std::vector<std::string>& roles, Rng& rng) {
  if (has_head(event_type)) throw ArgumentError("role head for " + event_type + " already exists");
  std::vector<std::string> labels{kNoRole};
  for (const auto& r : roles) {
    if (r == kNoRole) throw ArgumentError("role name " + kNoRole + " is reserved");
    labels.push_back(r);
  }
  heads_.emplace(event_type, nn::Linear(2 * config_.feature_dim, static_cast<Eigen::Index>(labels.size()),
                                        config_.head_init_std, rng));
  head_labels_[event_type] = std::move(labels);
}

const std::vector<std::string>& ArgumentModel::head_labels(const std::string& event_type) const {
  auto it = head_labels_.find(event_type);
  if (it == head_labels_.end()) throw ArgumentError("no role head for event type " + event_type);
  return it->second;
}

std::vector<std::string> ArgumentModel::head_types() const {
  std::vector<std::string> out;
  for (const auto& [t, h] : heads_) out.push_back(t);
  return out;
}

ag::Var ArgumentModel::features(std::span<const std::string> tokens, Mode mode, Rng* rng) const {
  return projector_.forward(encoder_->forward(tokens, mode, rng).hidden, mode, rng);
}

ag::Var ArgumentModel::role_probs(const ag::Var& features, const std::vector<Span>& spans,
                                  const std::string& event_type) const {
  auto it = heads_.find(event_type);
  if (it == heads_.end()) throw ArgumentError("no role head for event type " + event_type);
  if (spans.empty()) throw ArgumentError("role_probs: no candidate spans");
  std::vector<ag::Var> rows;
  rows.reserve(spans.size());
  for (const auto& s : spans) rows.push_back(encode_candidate(features, s));
  return ag::softmax_rows(it->second.forward(ag::concat_rows(rows)));
}

nn::ParameterList ArgumentModel::parameters() const {
  nn::ParameterList out;
  for (auto& p : encoder_->parameters()) out.push_back({"encoder." + p.name, p.var});
  projector_.collect("projector", out);
  for (auto& p : tagger_.parameters()) out.push_back({"tagger." + p.name, p.var});
  for (const auto& [type, head] : heads_) head.collect("heads." + type, out);
  return out;
}

void ArgumentModel::save(const std::string& path) const {
  Checkpoint ck;
  ck.metadata["format"] = "arguments";
  ck.metadata["config"] = to_json(config_);
  ck.metadata["heads"] = head_labels_;
  ck.metadata["tagger_trained"] = tagger_.trained();
  for (const auto& p : parameters()) ck.tensors.emplace_back(p.name, p.var.value());
  write_checkpoint(path, ck);
}

ArgumentModel ArgumentModel::load(const std::string& path) {
  const Checkpoint ck = read_checkpoint(path);
  if (ck.metadata.value("format", "") != "arguments") throw CheckpointError(path + " is not an argument checkpoint");
  ArgumentModel model(argument_config_from_json(ck.metadata.at("config")));
  Rng unused(0);
  for (const auto& [type, labels] : ck.metadata.at("heads").items()) {
    auto roles = labels.get<std::vector<std::string>>();
    if (roles.empty() || roles.front() != kNoRole) throw CheckpointError(path + ": head labels must start with None");
    model.add_head(type, {roles.begin() + 1, roles.end()}, unused);
  }
  load_parameters(model.parameters(), ck.tensors);
  if (ck.metadata.at("tagger_trained").get<bool>()) model.tagger_.mark_trained();
  return model;
}

ag::Var encode_candidate(const ag::Var& features, const Span& span) {
  if (span.start < 0 || span.start > span.end || span.end >= features.rows()) {
    throw ArgumentError("candidate span outside the sentence");
  }
  const std::vector<ag::Var> parts{ag::slice_rows(features, span.start, 1), ag::slice_rows(features, span.end, 1)};
  return ag::concat_cols(parts);
}

Matrix encode_candidate(const Matrix& features, const Span& span) {
  ag::NoGradGuard guard;
  return encode_candidate(ag::constant(features), span).value();
}

ag::Var role_loss(const ag::Var& role_probs, std::span<const int> gold) {
  for (int g : gold) {
    if (g < 0 || g >= role_probs.cols()) throw ArgumentError("role label outside the head");
  }
  return classification_loss(role_probs, gold);
}

double role_loss(const Matrix& role_probs, std::span<const int> gold) {
  return role_loss(ag::constant(role_probs), gold).item();
}

std::vector<EventMention> extract_arguments(const ArgumentModel& model, const std::vector<std::string>& tokens,
                                            const std::vector<EventMention>& detected) {
  std::vector<EventMention> out = detected;
  if (detected.empty()) return out;
  for (const auto& ev : detected) {
    if (!model.has_head(ev.event_type)) throw ArgumentError("no role head for detected type " + ev.event_type);
  }
  const auto entities = model.tagger().tag(tokens);
  for (auto& ev : out) ev.arguments.clear();
  if (entities.empty()) return out;
  ag::NoGradGuard guard;
  const ag::Var f = model.features(tokens, Mode::kEval, nullptr);
  for (auto& ev : out) {
    const Matrix probs = model.role_probs(f, entities, ev.event_type).value();
    const auto& labels = model.head_labels(ev.event_type);
    for (Eigen::Index c = 0; c < probs.rows(); ++c) {
      Eigen::Index best = 0;
      probs.row(c).maxCoeff(&best);
      if (best != 0) ev.arguments.push_back({entities[static_cast<std::size_t>(c)], labels[static_cast<std::size_t>(best)]});
    }
  }
  return out;
}

std::vector<TokenizedSentence> extract_all(const ArgumentModel& model, const std::vector<TokenizedSentence>& detected) {
  std::vector<TokenizedSentence> out;
  out.reserve(detected.size());
  for (const auto& s : detected) {
    TokenizedSentence p = s;
    p.events = extract_arguments(model, s.tokens, s.events);
    if (!s.events.empty()) p.entities = model.tagger().tag(s.tokens);
    out.push_back(std::move(p));
  }
  return out;
}

// --- argument memory ------------------------------------------------------

ArgumentMemory::ArgumentMemory(int capacity_per_type) : capacity_(capacity_per_type) {
  if (capacity_per_type < 0) throw ArgumentError("argument memory size must be >= 0");
}

void ArgumentMemory::update(const std::map<std::string, std::vector<ArgumentExemplar>>& selections) {
  for (const auto& [type, list] : selections) {
    if (type == kNoneLabel) throw ArgumentError("negative instances are never stored");
    if (by_type_.count(type)) throw ArgumentError("argument memory already holds " + type);
    if (static_cast<int>(list.size()) > capacity_) throw ArgumentError("selection for " + type + " exceeds memory size");
    for (const auto& e : list) {
      if (e.event_type != type) throw ArgumentError("exemplar of type " + e.event_type + " filed under " + type);
    }
  }
  for (const auto& [type, list] : selections) by_type_[type] = list;
}

const std::vector<ArgumentExemplar>& ArgumentMemory::exemplars(const std::string& type) const {
  static const std::vector<ArgumentExemplar> kEmpty;
  auto it = by_type_.find(type);
  return it == by_type_.end() ? kEmpty : it->second;
}

std::size_t ArgumentMemory::total() const {
  std::size_t n = 0;
  for (const auto& [t, l] : by_type_) n += l.size();
  return n;
}

std::vector<std::string> ArgumentMemory::types() const {
  std::vector<std::string> out;
  for (const auto& [t, l] : by_type_) out.push_back(t);
  return out;
}

nlohmann::json ArgumentMemory::to_json() const {
  nlohmann::json types = nlohmann::json::object();
  for (const auto& [type, list] : by_type_) {
    auto& arr = types[type] = nlohmann::json::array();
    for (const auto& e : list) {
      arr.push_back({{"sentence_id", e.sentence_id},
                     {"stage", e.stage},
                     {"sentence", nlohmann::json::parse(sentence_to_json_line(e.sentence))}});
    }
  }
  return {{"capacity", capacity_}, {"types", types}};
}

ArgumentMemory ArgumentMemory::from_json(const nlohmann::json& j) {
  ArgumentMemory memory(j.at("capacity").get<int>());
  std::map<std::string, std::vector<ArgumentExemplar>> all;
  for (const auto& [type, arr] : j.at("types").items()) {
    auto& list = all[type];
    for (const auto& e : arr) {
      list.push_back({e.at("sentence_id").get<std::string>(), type, e.at("stage").get<int>(),
                      parse_sentence_line(e.at("sentence").dump(), 0)});
    }
  }
  memory.update(all);
  return memory;
}

// --- training -------------------------------------------------------------

namespace {

struct RoleGroup {
  std::string type;
  std::vector<Span> spans;
  std::vector<int> labels;
};

struct RoleInstance {
  const TokenizedSentence* sentence;
  std::vector<RoleGroup> groups;
};

std::vector<Span> candidates_of(const ArgumentModel& model, const TokenizedSentence& s) {
  std::set<Span> all(s.entities.begin(), s.entities.end());
  for (const auto& sp : model.tagger().tag(s.tokens)) all.insert(sp);
  return {all.begin(), all.end()};
}

template <typename Fn>
EpochLog run_epoch(std::size_t n, int batch_size, Rng& shuffle, nn::Adam& opt, Fn&& batch_loss_of) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), shuffle);
  EpochLog log;
  int batches = 0;
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(n, start + static_cast<std::size_t>(batch_size));
    opt.zero_grad();
    const ag::Var loss = batch_loss_of(std::span<const std::size_t>(order.data() + start, end - start));
    if (!loss.defined()) continue;
    ag::backward(loss);
    opt.step();
    log.loss += loss.item();
    ++batches;
  }
  if (batches > 0) log.loss /= batches;
  log.cls = log.loss;
  return log;
}

}  // namespace

ArgumentStageLog train_argument_task(ArgumentModel& model, const std::vector<TokenizedSentence>& train,
                                     const std::vector<std::string>& types, const EventSchema& schema,
                                     ArgumentMemory& memory, const ArgumentTrainOptions& options, int stage) {
  ArgumentStageLog log;
  log.stage = stage;
  Rng head_rng(derive_seed(options.seed, "role-heads", static_cast<std::uint64_t>(stage)));
  for (const auto& t : types) {
    if (!model.has_head(t)) model.add_head(t, schema.roles(t), head_rng);
  }
  std::vector<const TokenizedSentence*> data;
  for (const auto& s : train) data.push_back(&s);
  for (const auto& t : memory.types()) {
    for (const auto& e : memory.exemplars(t)) data.push_back(&e.sentence);
  }
  if (data.empty()) return log;

  Rng dropout(derive_seed(options.seed, "arguments:dropout", static_cast<std::uint64_t>(stage)));
  Rng shuffle(derive_seed(options.seed, "arguments:shuffle", static_cast<std::uint64_t>(stage)));
  {
    nn::Adam opt(nn::vars_of(model.tagger().parameters()), options.adam);
    for (int e = 1; e <= options.tagger_epochs; ++e) {
      EpochLog ep = run_epoch(data.size(), options.batch_size, shuffle, opt, [&](std::span<const std::size_t> idx) {
        std::vector<ag::Var> parts;
        for (std::size_t i : idx) parts.push_back(model.tagger().loss(data[i]->tokens, data[i]->entities, Mode::kTrain, &dropout));
        ag::Var total = parts.front();
        for (std::size_t k = 1; k < parts.size(); ++k) total = ag::add(total, parts[k]);
        return ag::scale(total, 1.0 / static_cast<double>(parts.size()));
      });
      ep.stage = stage;
      ep.phase = "tagger";
      ep.epoch = e;
      log.curve.push_back(ep);
    }
    model.tagger().mark_trained();
  }

  std::vector<RoleInstance> instances;
  for (const TokenizedSentence* s : data) {
    RoleInstance inst{s, {}};
    std::vector<Span> cands;
    for (const auto& ev : s->events) {
      if (!model.has_head(ev.event_type)) continue;
      if (cands.empty()) cands = candidates_of(model, *s);
      if (cands.empty()) break;
      RoleGroup g{ev.event_type, cands, std::vector<int>(cands.size(), 0)};
      const auto& labels = model.head_labels(ev.event_type);
      for (const auto& a : ev.arguments) {
        auto it = std::find(cands.begin(), cands.end(), a.span);
        const auto role = std::find(labels.begin(), labels.end(), a.role);
        if (it == cands.end() || role == labels.end()) continue;
        g.labels[static_cast<std::size_t>(it - cands.begin())] = static_cast<int>(role - labels.begin());
      }
      inst.groups.push_back(std::move(g));
    }
    if (!inst.groups.empty()) instances.push_back(std::move(inst));
  }

  nn::ParameterList role_params;
  for (const auto& p : model.parameters()) {
    if (p.name.rfind("tagger.", 0) != 0) role_params.push_back(p);
  }
  nn::Adam opt(nn::vars_of(role_params), options.adam);
  for (int e = 1; e <= options.epochs && !instances.empty(); ++e) {
    EpochLog ep = run_epoch(instances.size(), options.batch_size, shuffle, opt, [&](std::span<const std::size_t> idx) {
      ag::Var total;
      double count = 0.0;
      for (std::size_t i : idx) {
        const auto& inst = instances[i];
        const ag::Var f = model.features(inst.sentence->tokens, Mode::kTrain, &dropout);
        for (const auto& g : inst.groups) {
          const double k = static_cast<double>(g.spans.size());
          const ag::Var l = ag::scale(role_loss(model.role_probs(f, g.spans, g.type), g.labels), k);
          total = total.defined() ? ag::add(total, l) : l;
          count += k;
        }
      }
      return ag::scale(total, 1.0 / count);
    });
    ep.stage = stage;
    ep.phase = "roles";
    ep.epoch = e;
    log.curve.push_back(ep);
  }

  if (options.memory_size <= 0) return log;
  std::map<std::string, std::vector<ArgumentExemplar>> selections;
  const std::set<std::string> wanted(types.begin(), types.end());
  std::map<std::string, std::vector<std::pair<std::size_t, Vector>>> cands;
  for (std::size_t i = 0; i < train.size(); ++i) {
    std::optional<Matrix> f;
    for (const auto& ev : train[i].events) {
      if (!wanted.count(ev.event_type)) continue;
      if (!f) {
        ag::NoGradGuard guard;
        f = model.features(train[i].tokens, Mode::kEval, nullptr).value();
      }
      Vector v = Vector::Zero(2 * f->cols());
      if (ev.arguments.empty()) {
        v = encode_candidate(*f, ev.trigger).transpose();
      } else {
        for (const auto& a : ev.arguments) v += encode_candidate(*f, a.span).transpose();
        v /= static_cast<double>(ev.arguments.size());
      }
      cands[ev.event_type].emplace_back(i, std::move(v));
    }
  }
  for (const auto& type : types) {
    auto it = cands.find(type);
    if (it == cands.end()) continue;
    Matrix feats(static_cast<Eigen::Index>(it->second.size()), it->second.front().second.size());
    for (std::size_t k = 0; k < it->second.size(); ++k) feats.row(static_cast<Eigen::Index>(k)) = it->second[k].second.transpose();
    std::set<std::size_t> taken;
    auto& chosen = selections[type];
    for (std::size_t k : select_exemplar_indices(feats, options.memory_size,
                                                 derive_seed(options.seed, "arg-exemplars:" + type,
                                                             static_cast<std::uint64_t>(stage)))) {
      const std::size_t idx = it->second[k].first;
      if (!taken.insert(idx).second) continue;
      chosen.push_back({train[idx].id, type, stage, restrict_to_types(train[idx], {type})});
    }
  }
  memory.update(selections);
  return log;
}

}  // namespace scr
