#include "scr/encoder.hpp"

#include "scr/checkpoint.hpp"

#include <cmath>
#include <map>

namespace scr {

std::string to_string(EncoderKind kind) {
  return kind == EncoderKind::kToyTransformer ? "toy-transformer" : "external-pretrained";
}

EncoderKind encoder_kind_from_string(const std::string& name) {
  if (name == "toy-transformer") return EncoderKind::kToyTransformer;
  if (name == "external-pretrained") return EncoderKind::kExternalPretrained;
  throw EncoderError("unknown encoder kind '" + name + "'");
}

void EncoderConfig::validate() const {
  if (n_layers < 1 || n_heads < 1 || d < 1) throw EncoderError("encoder needs n_layers, n_heads, d >= 1");
  if (d % n_heads != 0) throw EncoderError("encoder d must be divisible by n_heads");
  if (attention_layers < 1 || attention_layers > n_layers) {
    throw EncoderError("attention_layers (L=" + std::to_string(attention_layers) + ") must lie in [1, n_layers=" +
                       std::to_string(n_layers) + "]");
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw EncoderError("encoder dropout must lie in [0, 1)");
  if (vocab_buckets < 1 || max_length < 1 || ffn_dim < 1) throw EncoderError("encoder sizes must be positive");
  if (position_init_std < 0.0) throw EncoderError("position_init_std must be >= 0");
}

nlohmann::json to_json(const EncoderConfig& c) {
  return {{"kind", to_string(c.kind)},     {"n_layers", c.n_layers},         {"n_heads", c.n_heads},
          {"d", c.d},                      {"attention_layers", c.attention_layers}, {"dropout_rate", c.dropout_rate},
          {"seed", c.seed},                {"vocab_buckets", c.vocab_buckets}, {"max_length", c.max_length},
          {"ffn_dim", c.ffn_dim}, {"position_init_std", c.position_init_std}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.kind = encoder_kind_from_string(j.at("kind").get<std::string>());
  c.n_layers = j.at("n_layers").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.d = j.at("d").get<int>();
  c.attention_layers = j.at("attention_layers").get<int>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.vocab_buckets = j.at("vocab_buckets").get<int>();
  c.max_length = j.at("max_length").get<int>();
  c.ffn_dim = j.at("ffn_dim").get<int>();
  c.position_init_std = j.value("position_init_std", 0.1);
  return c;
}

EncoderOutput EncoderGraph::values() const {
  EncoderOutput out;
  out.hidden = hidden.value();
  out.attention.resize(attention.size());
  for (std::size_t l = 0; l < attention.size(); ++l) {
    for (const auto& a : attention[l]) out.attention[l].push_back(a.value());
  }
  return out;
}

EncoderOutput Encoder::encode(const TokenizedSentence& sentence) const {
  ag::NoGradGuard guard;
  return forward(sentence.tokens, Mode::kEval, nullptr).values();
}

int ToyTransformer::bucket_of(const std::string& token, int buckets) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : token) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return static_cast<int>(h % static_cast<std::uint64_t>(buckets));
}

ToyTransformer::ToyTransformer(EncoderConfig config) : config_(config) {
  config_.validate();
  if (config_.kind != EncoderKind::kToyTransformer) throw EncoderError("ToyTransformer built with a non-toy config");
  Rng rng(derive_seed(config_.seed, "toy-transformer"));
  const int d = config_.d;
  const int dh = d / config_.n_heads;
  const double init = 1.0 / std::sqrt(static_cast<double>(d));
  token_embedding_ = nn::make_parameter(nn::normal_matrix(config_.vocab_buckets, d, 1.0, rng));
  position_embedding_ = nn::make_parameter(nn::normal_matrix(config_.max_length, d, config_.position_init_std, rng));
  for (int l = 0; l < config_.n_layers; ++l) {
    Layer layer;
    layer.attn_norm = nn::LayerNorm(d);
    for (int h = 0; h < config_.n_heads; ++h) {
      layer.heads.push_back({nn::make_parameter(nn::normal_matrix(d, dh, init, rng)),
                             nn::make_parameter(nn::normal_matrix(d, dh, init, rng)),
                             nn::make_parameter(nn::normal_matrix(d, dh, init, rng))});
    }
    layer.attn_out = nn::Linear(d, d, init, rng);
    layer.ffn_norm = nn::LayerNorm(d);
    layer.ffn_in = nn::Linear(d, config_.ffn_dim, init, rng);
    layer.ffn_out = nn::Linear(config_.ffn_dim, d, 1.0 / std::sqrt(static_cast<double>(config_.ffn_dim)), rng);
    layers_.push_back(std::move(layer));
  }
  final_norm_ = nn::LayerNorm(d);
}

EncoderGraph ToyTransformer::forward(std::span<const std::string> tokens, Mode mode, Rng* rng) const {
  const auto n = static_cast<int>(tokens.size());
  if (n == 0) throw EncoderError("cannot encode an empty sentence");
  if (n > config_.max_length) {
    throw EncoderError("sentence of " + std::to_string(n) + " tokens exceeds encoder max length " +
                       std::to_string(config_.max_length));
  }
  const bool train = mode == Mode::kTrain;
  if (train && rng == nullptr) throw EncoderError("training-mode forward needs an rng");

  std::vector<int> ids(static_cast<std::size_t>(n));
  std::vector<int> positions(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    ids[static_cast<std::size_t>(i)] = bucket_of(tokens[static_cast<std::size_t>(i)], config_.vocab_buckets);
    positions[static_cast<std::size_t>(i)] = i;
  }
  ag::Var x = ag::add(ag::gather_rows(token_embedding_, ids), ag::gather_rows(position_embedding_, positions));
  if (train) x = ag::dropout(x, config_.dropout_rate, *rng);

  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(config_.d / config_.n_heads));
  EncoderGraph graph;
  for (const auto& layer : layers_) {
    ag::Var a = layer.attn_norm.forward(x);
    std::vector<ag::Var> head_out;
    std::vector<ag::Var> head_attn;
    for (const auto& head : layer.heads) {
      ag::Var q = ag::matmul(a, head.query);
      ag::Var k = ag::matmul(a, head.key);
      ag::Var v = ag::matmul(a, head.value);
      ag::Var weights = ag::softmax_rows(ag::scale(ag::matmul_transposed(q, k), inv_sqrt_dh));
      head_attn.push_back(weights);
      head_out.push_back(ag::matmul(weights, v));
    }
    ag::Var attn = layer.attn_out.forward(ag::concat_cols(head_out));
    if (train) attn = ag::dropout(attn, config_.dropout_rate, *rng);
    x = ag::add(x, attn);
    ag::Var ffn = layer.ffn_out.forward(ag::gelu(layer.ffn_in.forward(layer.ffn_norm.forward(x))));
    if (train) ffn = ag::dropout(ffn, config_.dropout_rate, *rng);
    x = ag::add(x, ffn);
    graph.attention.push_back(std::move(head_attn));
  }
  graph.hidden = final_norm_.forward(x);
  return graph;
}

nn::ParameterList ToyTransformer::parameters() const {
  nn::ParameterList out;
  out.push_back({"embedding.token", token_embedding_});
  out.push_back({"embedding.position", position_embedding_});
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string p = "layer" + std::to_string(l);
    const auto& layer = layers_[l];
    layer.attn_norm.collect(p + ".attn_norm", out);
    for (std::size_t h = 0; h < layer.heads.size(); ++h) {
      const std::string hp = p + ".head" + std::to_string(h);
      out.push_back({hp + ".query", layer.heads[h].query});
      out.push_back({hp + ".key", layer.heads[h].key});
      out.push_back({hp + ".value", layer.heads[h].value});
    }
    layer.attn_out.collect(p + ".attn_out", out);
    layer.ffn_norm.collect(p + ".ffn_norm", out);
    layer.ffn_in.collect(p + ".ffn_in", out);
    layer.ffn_out.collect(p + ".ffn_out", out);
  }
  final_norm_.collect("final_norm", out);
  return out;
}

std::unique_ptr<Encoder> ToyTransformer::clone() const {
  auto copy = std::make_unique<ToyTransformer>(*this);
  copy->token_embedding_ = nn::clone_parameter(token_embedding_);
  copy->position_embedding_ = nn::clone_parameter(position_embedding_);
  for (auto& layer : copy->layers_) {
    layer.attn_norm = layer.attn_norm.clone();
    for (auto& h : layer.heads) {
      h.query = nn::clone_parameter(h.query);
      h.key = nn::clone_parameter(h.key);
      h.value = nn::clone_parameter(h.value);
    }
    layer.attn_out = layer.attn_out.clone();
    layer.ffn_norm = layer.ffn_norm.clone();
    layer.ffn_in = layer.ffn_in.clone();
    layer.ffn_out = layer.ffn_out.clone();
  }
  copy->final_norm_ = final_norm_.clone();
  return copy;
}

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& config) {
  config.validate();
  switch (config.kind) {
    case EncoderKind::kToyTransformer:
      return std::make_unique<ToyTransformer>(config);
    case EncoderKind::kExternalPretrained:
      break;
  }
  throw EncoderError(
      "external-pretrained encoders are not bundled with this build; implement scr::Encoder to plug one in");
}

void load_parameters(const nn::ParameterList& into, const std::vector<std::pair<std::string, Matrix>>& values,
                     const std::string& prefix) {
  std::map<std::string, const Matrix*> by_name;
  for (const auto& [name, m] : values) by_name[name] = &m;
  for (const auto& p : into) {
    auto it = by_name.find(prefix + p.name);
    if (it == by_name.end()) throw CheckpointError("checkpoint is missing tensor '" + prefix + p.name + "'");
    if (it->second->rows() != p.var.rows() || it->second->cols() != p.var.cols()) {
      throw CheckpointError("checkpoint tensor '" + prefix + p.name + "' has the wrong shape");
    }
    ag::Var v = p.var;
    v.mutable_value() = *it->second;
  }
}

void save_encoder(const Encoder& encoder, const std::string& path) {
  Checkpoint ck;
  ck.metadata["format"] = "encoder";
  ck.metadata["config"] = to_json(encoder.config());
  for (const auto& p : encoder.parameters()) ck.tensors.emplace_back(p.name, p.var.value());
  write_checkpoint(path, ck);
}

std::unique_ptr<Encoder> load_encoder(const std::string& path) {
  const Checkpoint ck = read_checkpoint(path);
  if (ck.metadata.value("format", "") != "encoder") throw CheckpointError(path + " is not an encoder checkpoint");
  auto encoder = make_encoder(encoder_config_from_json(ck.metadata.at("config")));
  load_parameters(encoder->parameters(), ck.tensors);
  return encoder;
}

// --- projection and attention ---------------------------------------------

FeatureProjector::FeatureProjector(int hidden_dim, int feature_dim, double dropout_rate, Rng& init_rng)
    : linear_(hidden_dim, feature_dim, 1.0 / std::sqrt(static_cast<double>(hidden_dim)), init_rng),
      norm_(feature_dim),
      dropout_rate_(dropout_rate) {
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw EncoderError("projector dropout must lie in [0, 1)");
}

ag::Var FeatureProjector::forward(const ag::Var& hidden, Mode mode, Rng* rng) const {
  if (hidden.cols() != linear_.in_dim()) throw EncoderError("projector input width does not match hidden dim");
  ag::Var h = hidden;
  if (mode == Mode::kTrain) {
    if (rng == nullptr) throw EncoderError("training-mode projection needs an rng");
    h = ag::dropout(h, dropout_rate_, *rng);
  }
  return norm_.forward(linear_.forward(h));
}

void FeatureProjector::collect(const std::string& prefix, nn::ParameterList& out) const {
  linear_.collect(prefix + ".linear", out);
  norm_.collect(prefix + ".norm", out);
}

FeatureProjector FeatureProjector::clone() const {
  FeatureProjector p;
  p.linear_ = linear_.clone();
  p.norm_ = norm_.clone();
  p.dropout_rate_ = dropout_rate_;
  return p;
}

Matrix project_features(const EncoderOutput& output, const FeatureProjector& projector) {
  ag::NoGradGuard guard;
  return projector.forward(ag::constant(output.hidden), Mode::kEval, nullptr).value();
}

namespace {

void check_layers(std::size_t available, int layers) {
  if (layers < 1 || static_cast<std::size_t>(layers) > available) {
    throw EncoderError("context attention over " + std::to_string(layers) + " layers, encoder has " +
                       std::to_string(available));
  }
}

}  // namespace

Matrix context_attention(const EncoderOutput& output, int layers) {
  check_layers(output.n_layers(), layers);
  const auto n = output.hidden.rows();
  Matrix acc = Matrix::Zero(n, n);
  std::size_t count = 0;
  for (std::size_t l = output.n_layers() - static_cast<std::size_t>(layers); l < output.n_layers(); ++l) {
    for (const auto& a : output.attention[l]) {
      acc += a;
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

ag::Var context_attention(const EncoderGraph& graph, int layers) {
  check_layers(graph.attention.size(), layers);
  ag::Var acc;
  std::size_t count = 0;
  for (std::size_t l = graph.attention.size() - static_cast<std::size_t>(layers); l < graph.attention.size(); ++l) {
    for (const auto& a : graph.attention[l]) {
      acc = acc.defined() ? ag::add(acc, a) : a;
      ++count;
    }
  }
  return ag::scale(acc, 1.0 / static_cast<double>(count));
}

Matrix attentive_features(const Matrix& features, const Matrix& attn) {
  if (attn.rows() != features.rows() || attn.cols() != features.rows()) {
    throw EncoderError("attentive_features: attention must be n x n for n feature rows");
  }
  return (attn * features) / static_cast<double>(features.rows());
}

ag::Var attentive_features(const ag::Var& features, const ag::Var& attn) {
  if (attn.rows() != features.rows() || attn.cols() != features.rows()) {
    throw EncoderError("attentive_features: attention must be n x n for n feature rows");
  }
  return ag::scale(ag::matmul(attn, features), 1.0 / static_cast<double>(features.rows()));
}

}  // namespace scr
