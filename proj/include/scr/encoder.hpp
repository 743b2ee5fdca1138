#pragma once

// Contextual token encoders, the feature projection applied on top of them,
// and the attention-weighted ("attentive") token features used for feature
// distillation.

#include "scr/autograd.hpp"
#include "scr/corpus.hpp"
#include "scr/nn.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace scr {

class EncoderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Mode { kEval, kTrain };

enum class EncoderKind { kToyTransformer, kExternalPretrained };

std::string to_string(EncoderKind kind);
EncoderKind encoder_kind_from_string(const std::string& name);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::kToyTransformer;
  int n_layers = 3;
  int n_heads = 2;
  int d = 32;
  int attention_layers = 3;  // L: how many final layers context attention averages
  double dropout_rate = 0.2;
  std::uint64_t seed = 0;
  int vocab_buckets = 4096;  // tokens are hashed into this many embedding rows
  int max_length = 64;
  int ffn_dim = 64;
  double position_init_std = 0.1;

  void validate() const;
};

nlohmann::json to_json(const EncoderConfig& config);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

/// Plain values of one encoder pass.
struct EncoderOutput {
  Matrix hidden;                                // n x d
  std::vector<std::vector<Matrix>> attention;   // [layer][head] -> n x n, rows sum to 1

  std::size_t n_layers() const { return attention.size(); }
  std::size_t n_heads() const { return attention.empty() ? 0 : attention.front().size(); }
};

/// Differentiable form of an encoder pass.
struct EncoderGraph {
  ag::Var hidden;
  std::vector<std::vector<ag::Var>> attention;

  EncoderOutput values() const;
};

class Encoder {
 public:
  virtual ~Encoder() = default;

  /// `rng` drives dropout and is required in training mode.
  virtual EncoderGraph forward(std::span<const std::string> tokens, Mode mode, Rng* rng) const = 0;
  virtual const EncoderConfig& config() const = 0;
  virtual nn::ParameterList parameters() const = 0;
  virtual std::unique_ptr<Encoder> clone() const = 0;

  /// Evaluation-mode encoding of a sentence.
  EncoderOutput encode(const TokenizedSentence& sentence) const;
};

/// Small pre-norm transformer trained from scratch. Tokens are hashed
/// (FNV-1a) into `vocab_buckets` embedding rows.
class ToyTransformer final : public Encoder {
 public:
  explicit ToyTransformer(EncoderConfig config);

  EncoderGraph forward(std::span<const std::string> tokens, Mode mode, Rng* rng) const override;
  const EncoderConfig& config() const override { return config_; }
  nn::ParameterList parameters() const override;
  std::unique_ptr<Encoder> clone() const override;

  static int bucket_of(const std::string& token, int buckets);

 private:
  struct Head {
    ag::Var query, key, value;  // d x d_head each
  };
  struct Layer {
    nn::LayerNorm attn_norm;
    std::vector<Head> heads;
    nn::Linear attn_out;
    nn::LayerNorm ffn_norm;
    nn::Linear ffn_in;
    nn::Linear ffn_out;
  };

  EncoderConfig config_;
  ag::Var token_embedding_;
  ag::Var position_embedding_;
  std::vector<Layer> layers_;
  nn::LayerNorm final_norm_;
};

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& config);

/// Writes config + parameters to one checkpoint file.
void save_encoder(const Encoder& encoder, const std::string& path);
std::unique_ptr<Encoder> load_encoder(const std::string& path);
/// Copies parameter values by name; shapes must match.
void load_parameters(const nn::ParameterList& into, const std::vector<std::pair<std::string, Matrix>>& values,
                     const std::string& prefix = "");

/// f = LayerNorm(Dropout(h) W + b), one row per token.
class FeatureProjector {
 public:
  FeatureProjector() = default;
  FeatureProjector(int hidden_dim, int feature_dim, double dropout_rate, Rng& init_rng);

  ag::Var forward(const ag::Var& hidden, Mode mode, Rng* rng) const;
  int hidden_dim() const { return static_cast<int>(linear_.in_dim()); }
  int feature_dim() const { return static_cast<int>(linear_.out_dim()); }
  double dropout_rate() const { return dropout_rate_; }

  nn::Linear& linear() { return linear_; }
  nn::LayerNorm& norm() { return norm_; }
  void collect(const std::string& prefix, nn::ParameterList& out) const;
  FeatureProjector clone() const;

 private:
  nn::Linear linear_;
  nn::LayerNorm norm_;
  double dropout_rate_ = 0.0;
};

/// Evaluation-mode projection of an encoder output.
Matrix project_features(const EncoderOutput& output, const FeatureProjector& projector);

/// Mean over the last `layers` layers and all heads of query->key attention.
Matrix context_attention(const EncoderOutput& output, int layers);
ag::Var context_attention(const EncoderGraph& graph, int layers);

/// A_j = (1/n) sum_k attn[j,k] f_k.
Matrix attentive_features(const Matrix& features, const Matrix& attn);
ag::Var attentive_features(const ag::Var& features, const ag::Var& attn);

}  // namespace scr
