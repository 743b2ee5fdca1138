// Command-line entry point: run, sweep, evaluate, gen-data.

#include "scr/corpus.hpp"
#include "scr/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <iostream>

namespace {

void print_summary(const scr::RunResult& r) {
  std::cout << r.run_dir << "\n";
  const auto& s = r.summary;
  std::cout << "final detection F1: " << s.value("final_detection_f1", 0.0) << "\n";
  if (s.contains("final_argument_f1") && s["final_argument_f1"].is_number()) {
    std::cout << "final argument F1: " << s["final_argument_f1"].get<double>() << "\n";
  }
  if (s.contains("bwt") && s["bwt"].is_number()) std::cout << "BWT: " << s["bwt"].get<double>() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Continual event extraction with semantic-confusion rectification");
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  scr::RunConfig run_config;
  auto* run_cmd = app.add_subcommand("run", "train and evaluate all K stages (resumes a partial run directory)");
  scr::bind_run_config(*run_cmd, run_config);

  scr::RunConfig sweep_config;
  int permutations = 6;
  auto* sweep_cmd = app.add_subcommand("sweep", "one run per task permutation, then mean and std");
  scr::bind_run_config(*sweep_cmd, sweep_config);
  sweep_cmd->add_option("--permutations", permutations, "number of permutation seeds")->check(CLI::PositiveNumber);

  std::string predictions, gold;
  auto* eval_cmd = app.add_subcommand("evaluate", "score a predictions file against gold");
  eval_cmd->add_option("--predictions", predictions)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--gold", gold)->required()->check(CLI::ExistingFile);

  scr::SyntheticOptions synth;
  int max_count = 200, min_count = 5;
  std::string out_corpus, out_schema;
  auto* gen_cmd = app.add_subcommand("gen-data", "write a synthetic corpus");
  gen_cmd->add_option("--types", synth.n_types)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--max-count", max_count)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--min-count", min_count)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--vocab", synth.vocab_size)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", synth.seed);
  gen_cmd->add_option("--output", out_corpus, "corpus JSON-lines path")->required();
  gen_cmd->add_option("--schema-output", out_schema, "schema JSON path");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*run_cmd) {
      print_summary(scr::run(run_config));
    } else if (*sweep_cmd) {
      const auto result = scr::sweep(sweep_config, permutations);
      std::cout << result.aggregate.dump(2) << "\n";
    } else if (*eval_cmd) {
      std::cout << scr::evaluate_files(predictions, gold).dump(2) << "\n";
    } else if (*gen_cmd) {
      if (min_count > max_count) throw scr::ConfigError("--min-count must not exceed --max-count");
      synth.instances_per_type = scr::power_law_counts(synth.n_types, max_count, min_count);
      const auto corpus = scr::generate_synthetic(synth);
      const auto parent = std::filesystem::path(out_corpus).parent_path();
      if (!parent.empty()) std::filesystem::create_directories(parent);
      scr::save_corpus(corpus.sentences, out_corpus);
      if (!out_schema.empty()) scr::save_schema(corpus.schema, out_schema);
      std::cout << corpus.sentences.size() << " sentences written to " << out_corpus << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
