#pragma once

#include "scr/corpus.hpp"
#include "scr/detection.hpp"
#include "scr/labels.hpp"

#include <string>
#include <vector>

namespace testing_support {

/// Toy detection model with the default encoder width d = 32.
inline scr::DetectionModelConfig toy_detection_config(int feature_dim = 16, std::uint64_t seed = 3) {
  scr::DetectionModelConfig c;
  c.encoder.d = 32;
  c.encoder.n_layers = 2;
  c.encoder.attention_layers = 2;
  c.encoder.ffn_dim = 32;
  c.encoder.vocab_buckets = 128;
  c.feature_dim = feature_dim;
  c.seed = seed;
  return c;
}

inline scr::LabeledSentence labeled(const std::string& id, const std::vector<std::string>& tokens,
                                    const std::vector<std::string>& types) {
  scr::LabeledSentence s;
  s.id = id;
  s.tokens = tokens;
  for (const auto& t : types) s.labels.push_back(scr::TokenLabel{t, false, 1.0});
  return s;
}

inline scr::Corpus synthetic(int types, int max_count, int min_count, std::uint64_t seed = 7) {
  scr::SyntheticOptions o;
  o.n_types = types;
  o.instances_per_type = scr::power_law_counts(types, max_count, min_count);
  o.seed = seed;
  return scr::generate_synthetic(o);
}

}  // namespace testing_support
