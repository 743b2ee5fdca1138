#pragma once

// Run orchestration: configuration, the K-stage loop over detection and
// arguments for each strategy, per-stage artifacts with resume, and sweeps
// over task permutations.

#include "scr/arguments.hpp"
#include "scr/corpus.hpp"
#include "scr/eval.hpp"
#include "scr/trainer.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace CLI {
class App;
}

namespace scr {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Strategy { kFull, kFineTuning, kJointTraining };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

struct RunConfig {
  // data: a corpus file, or the synthetic generator when empty
  std::string corpus;
  std::string schema;
  int synthetic_types = 20;
  int synthetic_max_count = 200;
  int synthetic_min_count = 5;
  int synthetic_vocab = 400;
  std::uint64_t data_seed = 7;
  std::uint64_t split_seed = 0;

  int tasks = 5;                // K
  int memory_size = 10;         // m
  double tau = 0.8;
  double alpha = 1.0;
  double beta = 1.0;
  int attention_layers = 3;     // L
  double dropout = 0.2;
  int batch_size = 8;
  int feature_dim = 512;
  double lr = 1e-3;
  int epochs = 8;
  int warmup_epochs = 1;
  double long_tail_fraction = 0.8;
  bool select_on_dev = true;

  int encoder_layers = 3;
  int encoder_heads = 2;
  int encoder_dim = 32;

  std::string arguments = "auto";  // auto | on | off
  int arg_feature_dim = 64;
  double arg_lr = 1e-3;
  int arg_epochs = 8;
  int tagger_epochs = 6;

  Strategy strategy = Strategy::kFull;
  bool da = true;
  bool afd = true;
  bool spd = true;
  bool pkd = true;  // off disables both afd and spd
  bool pkt = true;

  std::uint64_t permutation_seed = 0;
  std::uint64_t model_seed = 0;
  std::string output_dir = "runs/run";

  void validate() const;
};

/// Registers one option per RunConfig field (`--tau`, `--memory-size`, ...)
/// plus `--config FILE` for flat `key = value` files using the same names.
void bind_run_config(CLI::App& app, RunConfig& config);
/// Parses a flat key = value file (keys as in `bind_run_config`, with '-' or '_').
RunConfig load_run_config(const std::string& path);
std::string run_config_text(const RunConfig& config);

/// Detection options implied by a config (strategy and ablations applied).
TrainOptions detection_options(const RunConfig& config);
ArgumentTrainOptions argument_options(const RunConfig& config);
DetectionModelConfig detection_model_config(const RunConfig& config);
ArgumentModelConfig argument_model_config(const RunConfig& config);

/// Corpus (file or synthetic) partitioned into the task stream.
TaskStream build_stream(const RunConfig& config);

struct RunResult {
  std::string run_dir;
  std::vector<StageReport> reports;
  F1Matrix matrix;
  nlohmann::json summary;
  int resumed_stages = 0;
};

/// Executes or resumes all K stages, writing artifacts under output_dir.
RunResult run(const RunConfig& config);

struct SweepResult {
  std::vector<RunResult> runs;
  nlohmann::json aggregate;
};

/// One run per permutation seed (base, base+1, ...) in output_dir/perm_<p>,
/// then mean and std of every summary metric in output_dir/aggregate.json.
SweepResult sweep(const RunConfig& config, int permutations);

/// Mean / sample-std aggregation of numeric summary fields.
nlohmann::json aggregate_summaries(const std::vector<nlohmann::json>& summaries);

/// Scores a predictions file against a gold corpus file.
nlohmann::json evaluate_files(const std::string& predictions, const std::string& gold);

/// Predictions in the corpus line format.
void write_predictions(const std::vector<TokenizedSentence>& predictions, const std::string& path);

}  // namespace scr
