#include "scr/pipeline.hpp"

#include "scr/checkpoint.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;

namespace scr {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kFull: return "full";
    case Strategy::kFineTuning: return "fine-tuning";
    case Strategy::kJointTraining: return "joint-training";
  }
  return "full";
}

Strategy strategy_from_string(const std::string& name) {
  if (name == "full") return Strategy::kFull;
  if (name == "fine-tuning") return Strategy::kFineTuning;
  if (name == "joint-training") return Strategy::kJointTraining;
  throw ConfigError("unknown strategy '" + name + "' (full, fine-tuning, joint-training)");
}

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(tasks >= 1, "tasks must be >= 1");
  require(memory_size >= 0, "memory_size must be >= 0");
  require(tau > 0.0 && tau <= 1.0, "tau must lie in (0, 1]");
  require(alpha >= 0.0 && beta >= 0.0, "alpha and beta must be >= 0");
  require(encoder_layers >= 1 && encoder_heads >= 1 && encoder_dim >= 1, "encoder sizes must be >= 1");
  require(attention_layers >= 1 && attention_layers <= encoder_layers,
          "attention_layers must lie in [1, encoder_layers]");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  require(batch_size >= 1 && feature_dim >= 1 && arg_feature_dim >= 1, "batch and feature sizes must be >= 1");
  require(epochs >= 1 && warmup_epochs >= 0 && arg_epochs >= 0 && tagger_epochs >= 0, "epoch counts out of range");
  require(lr > 0.0 && arg_lr > 0.0, "learning rates must be positive");
  require(long_tail_fraction >= 0.0 && long_tail_fraction <= 1.0, "long_tail_fraction must lie in [0, 1]");
  require(arguments == "auto" || arguments == "on" || arguments == "off", "arguments must be auto, on or off");
  if (corpus.empty()) {
    require(synthetic_types >= 1, "synthetic_types must be >= 1");
    require(synthetic_min_count >= 1 && synthetic_max_count >= synthetic_min_count,
            "synthetic counts need 1 <= min <= max");
  }
  require(!output_dir.empty(), "output_dir must be set");
}

namespace {

// Both spellings so flags read naturally and config keys can use '_'.
std::string names(const std::string& key) {
  std::string dashed = key;
  std::replace(dashed.begin(), dashed.end(), '_', '-');
  return dashed == key ? "--" + key : "--" + dashed + ",--" + key;
}

void bind_fields(CLI::App& app, RunConfig& c) {
  app.add_option(names("corpus"), c.corpus, "JSON-lines corpus; empty uses the synthetic generator");
  app.add_option(names("schema"), c.schema, "schema JSON (inferred from the corpus when empty)");
  app.add_option(names("synthetic_types"), c.synthetic_types);
  app.add_option(names("synthetic_max_count"), c.synthetic_max_count);
  app.add_option(names("synthetic_min_count"), c.synthetic_min_count);
  app.add_option(names("synthetic_vocab"), c.synthetic_vocab);
  app.add_option(names("data_seed"), c.data_seed);
  app.add_option(names("split_seed"), c.split_seed);
  app.add_option(names("tasks"), c.tasks, "number of tasks K");
  app.add_option(names("memory_size"), c.memory_size, "exemplars per type m");
  app.add_option(names("tau"), c.tau, "pseudo-label threshold");
  app.add_option(names("alpha"), c.alpha, "attention feature distillation weight");
  app.add_option(names("beta"), c.beta, "selective prediction distillation weight");
  app.add_option(names("attention_layers"), c.attention_layers, "L, layers averaged for context attention");
  app.add_option(names("dropout"), c.dropout);
  app.add_option(names("batch_size"), c.batch_size);
  app.add_option(names("feature_dim"), c.feature_dim);
  app.add_option(names("lr"), c.lr);
  app.add_option(names("epochs"), c.epochs);
  app.add_option(names("warmup_epochs"), c.warmup_epochs);
  app.add_option(names("long_tail_fraction"), c.long_tail_fraction);
  app.add_option(names("select_on_dev"), c.select_on_dev);
  app.add_option(names("encoder_layers"), c.encoder_layers);
  app.add_option(names("encoder_heads"), c.encoder_heads);
  app.add_option(names("encoder_dim"), c.encoder_dim);
  app.add_option(names("arguments"), c.arguments, "auto, on or off");
  app.add_option(names("arg_feature_dim"), c.arg_feature_dim);
  app.add_option(names("arg_lr"), c.arg_lr);
  app.add_option(names("arg_epochs"), c.arg_epochs);
  app.add_option(names("tagger_epochs"), c.tagger_epochs);
  const std::map<std::string, Strategy> strategies{{"full", Strategy::kFull},
                                                   {"fine-tuning", Strategy::kFineTuning},
                                                   {"joint-training", Strategy::kJointTraining}};
  app.add_option(names("strategy"), c.strategy, "full, fine-tuning or joint-training")
      ->transform(CLI::CheckedTransformer(strategies, CLI::ignore_case));
  app.add_option(names("da"), c.da, "pseudo-label augmentation");
  app.add_option(names("afd"), c.afd, "attention feature distillation");
  app.add_option(names("spd"), c.spd, "selective prediction distillation");
  app.add_option(names("pkd"), c.pkd, "both distillation losses");
  app.add_option(names("pkt"), c.pkt, "prototype knowledge transfer");
  app.add_option(names("permutation_seed"), c.permutation_seed);
  app.add_option(names("model_seed"), c.model_seed);
  app.add_option(names("output_dir"), c.output_dir);
}

}  // namespace

void bind_run_config(CLI::App& app, RunConfig& c) {
  // Registered first so the file is applied before any explicit flag.
  app.add_option_function<std::string>(
         "--config", [&c](const std::string& path) {
           try {
             c = load_run_config(path);
           } catch (const ConfigError& e) {
             throw CLI::ValidationError("--config", e.what());
           }
         },
         "flat key = value run configuration; explicit flags override it")
      ->check(CLI::ExistingFile);
  bind_fields(app, c);
}

RunConfig load_run_config(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
  RunConfig c;
  CLI::App app("config");
  app.set_config("--config");
  app.allow_config_extras(false);
  bind_fields(app, c);
  try {
    app.parse(std::vector<std::string>{path, "--config"});
  } catch (const CLI::ParseError& e) {
    throw ConfigError("invalid config " + path + ": " + e.what());
  }
  c.validate();
  return c;
}

std::string run_config_text(const RunConfig& c) {
  std::ostringstream out;
  out.precision(17);
  auto b = [](bool v) { return v ? "true" : "false"; };
  auto q = [](const std::string& s) { return "\"" + s + "\""; };
  out << "corpus = " << q(c.corpus) << "\n"
      << "schema = " << q(c.schema) << "\n"
      << "synthetic_types = " << c.synthetic_types << "\n"
      << "synthetic_max_count = " << c.synthetic_max_count << "\n"
      << "synthetic_min_count = " << c.synthetic_min_count << "\n"
      << "synthetic_vocab = " << c.synthetic_vocab << "\n"
      << "data_seed = " << c.data_seed << "\n"
      << "split_seed = " << c.split_seed << "\n"
      << "tasks = " << c.tasks << "\n"
      << "memory_size = " << c.memory_size << "\n"
      << "tau = " << c.tau << "\n"
      << "alpha = " << c.alpha << "\n"
      << "beta = " << c.beta << "\n"
      << "attention_layers = " << c.attention_layers << "\n"
      << "dropout = " << c.dropout << "\n"
      << "batch_size = " << c.batch_size << "\n"
      << "feature_dim = " << c.feature_dim << "\n"
      << "lr = " << c.lr << "\n"
      << "epochs = " << c.epochs << "\n"
      << "warmup_epochs = " << c.warmup_epochs << "\n"
      << "long_tail_fraction = " << c.long_tail_fraction << "\n"
      << "select_on_dev = " << b(c.select_on_dev) << "\n"
      << "encoder_layers = " << c.encoder_layers << "\n"
      << "encoder_heads = " << c.encoder_heads << "\n"
      << "encoder_dim = " << c.encoder_dim << "\n"
      << "arguments = " << q(c.arguments) << "\n"
      << "arg_feature_dim = " << c.arg_feature_dim << "\n"
      << "arg_lr = " << c.arg_lr << "\n"
      << "arg_epochs = " << c.arg_epochs << "\n"
      << "tagger_epochs = " << c.tagger_epochs << "\n"
      << "strategy = " << q(to_string(c.strategy)) << "\n"
      << "da = " << b(c.da) << "\n"
      << "afd = " << b(c.afd) << "\n"
      << "spd = " << b(c.spd) << "\n"
      << "pkd = " << b(c.pkd) << "\n"
      << "pkt = " << b(c.pkt) << "\n"
      << "permutation_seed = " << c.permutation_seed << "\n"
      << "model_seed = " << c.model_seed << "\n"
      << "output_dir = " << q(c.output_dir) << "\n";
  return out.str();
}

TrainOptions detection_options(const RunConfig& c) {
  TrainOptions o;
  o.epochs = c.epochs;
  o.warmup_epochs = c.warmup_epochs;
  o.batch_size = c.batch_size;
  o.adam.lr = c.lr;
  o.pseudo.tau = c.tau;
  o.weights = {c.alpha, c.beta};
  o.attention_layers = c.attention_layers;
  o.memory_size = c.memory_size;
  o.long_tail_fraction = c.long_tail_fraction;
  o.select_on_dev = c.select_on_dev;
  o.seed = c.model_seed;
  o.pseudo_labels = c.da;
  o.afd = c.afd && c.pkd;
  o.spd = c.spd && c.pkd;
  o.prototypes = c.pkt;
  if (c.strategy != Strategy::kFull) {
    o.memory_size = 0;
    o.pseudo_labels = o.afd = o.spd = o.prototypes = false;
  }
  return o;
}

ArgumentTrainOptions argument_options(const RunConfig& c) {
  ArgumentTrainOptions o;
  o.tagger_epochs = c.tagger_epochs;
  o.epochs = c.arg_epochs;
  o.batch_size = c.batch_size;
  o.adam.lr = c.arg_lr;
  o.memory_size = c.strategy == Strategy::kFull ? c.memory_size : 0;
  o.seed = c.model_seed;
  return o;
}

DetectionModelConfig detection_model_config(const RunConfig& c) {
  DetectionModelConfig m;
  m.encoder.n_layers = c.encoder_layers;
  m.encoder.n_heads = c.encoder_heads;
  m.encoder.d = c.encoder_dim;
  m.encoder.attention_layers = c.attention_layers;
  m.encoder.dropout_rate = c.dropout;
  m.feature_dim = c.feature_dim;
  m.dropout_rate = c.dropout;
  m.seed = c.model_seed;
  return m;
}

ArgumentModelConfig argument_model_config(const RunConfig& c) {
  ArgumentModelConfig m;
  m.encoder.n_layers = c.encoder_layers;
  m.encoder.n_heads = c.encoder_heads;
  m.encoder.d = c.encoder_dim;
  m.encoder.attention_layers = c.attention_layers;
  m.encoder.dropout_rate = c.dropout;
  m.feature_dim = c.arg_feature_dim;
  m.dropout_rate = c.dropout;
  m.seed = derive_seed(c.model_seed, "arguments");
  return m;
}

TaskStream build_stream(const RunConfig& c) {
  Corpus corpus;
  if (!c.corpus.empty()) {
    corpus = load_corpus(c.corpus, c.schema.empty() ? std::nullopt : std::optional<std::string>(c.schema));
  } else {
    SyntheticOptions so;
    so.n_types = c.synthetic_types;
    so.instances_per_type = power_law_counts(c.synthetic_types, c.synthetic_max_count, c.synthetic_min_count);
    so.vocab_size = c.synthetic_vocab;
    so.seed = c.data_seed;
    corpus = generate_synthetic(so);
  }
  SplitOptions split;
  split.split_seed = c.split_seed;
  return partition_tasks(corpus.schema, corpus.sentences, c.tasks, c.permutation_seed, split);
}

void write_predictions(const std::vector<TokenizedSentence>& predictions, const std::string& path) {
  save_corpus(predictions, path);
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupted run artifact " + path.string() + ": " + e.what());
  }
}

fs::path stage_dir(const fs::path& run_dir, int stage) { return run_dir / ("stage_" + std::to_string(stage)); }

// Training counts of each seen type in the task that introduced it.
std::map<std::string, int> introduced_counts(const TaskStream& stream, int stage) {
  std::map<std::string, int> out;
  for (int t = 0; t < stage; ++t) {
    const auto& task = stream.tasks[static_cast<std::size_t>(t)];
    const auto counts = mention_counts(task.train);
    for (const auto& type : task.types) {
      auto it = counts.find(type);
      out[type] = it == counts.end() ? 0 : it->second;
    }
  }
  return out;
}

StageReport score_stage(const TaskStream& stream, int stage, const std::vector<TokenizedSentence>& predictions,
                        bool with_arguments, double long_tail_fraction, const std::vector<TokenizedSentence>& gold) {
  StageReport r;
  r.stage = stage;
  const auto seen = stream.seen_types(stage);
  const std::set<std::string> seen_set(seen.begin(), seen.end());
  r.detection = detection_f1(predictions, gold, &seen_set);
  if (with_arguments) r.arguments = argument_f1(predictions, gold, &seen_set);
  r.type_counts = introduced_counts(stream, stage);
  const auto tail = long_tail_types(r.type_counts, long_tail_fraction);
  std::set<std::string> popular;
  for (const auto& t : seen) {
    if (!tail.count(t)) popular.insert(t);
  }
  r.long_tail = long_tail_slice(predictions, gold, tail);
  r.popular = long_tail_slice(predictions, gold, popular);
  std::map<std::string, const TokenizedSentence*> by_id;
  for (const auto& p : predictions) by_id[p.id] = &p;
  for (int j = 1; j <= stage; ++j) {
    const auto& task = stream.tasks[static_cast<std::size_t>(j - 1)];
    const std::set<std::string> types(task.types.begin(), task.types.end());
    std::vector<TokenizedSentence> preds;
    for (const auto& g : task.test) preds.push_back(*by_id.at(g.id));
    r.task_f1.push_back(detection_f1(preds, task.test, &types).f1);
  }
  return r;
}

std::string pseudo_label_lines(const std::vector<PseudoLabelRecord>& records) {
  std::string out;
  for (const auto& r : records) out += r.to_json().dump() + "\n";
  return out;
}

}  // namespace

RunResult run(const RunConfig& config) {
  config.validate();
  RunResult result;
  const fs::path dir(config.output_dir);
  result.run_dir = dir.string();
  fs::create_directories(dir);
  const std::string config_text = run_config_text(config);
  if (fs::exists(dir / "config.txt")) {
    if (read_text(dir / "config.txt") != config_text) {
      throw ConfigError("run directory " + dir.string() + " holds a run with a different configuration");
    }
  } else {
    write_text(dir / "config.txt", config_text);
  }

  const TaskStream stream = build_stream(config);
  const bool has_args = stream.schema.has_arguments();
  if (config.arguments == "on" && !has_args) throw ConfigError("arguments=on but the corpus has no argument annotations");
  const bool with_arguments = config.arguments == "on" || (config.arguments == "auto" && has_args);
  const int k = stream.size();
  const TrainOptions dopt = detection_options(config);
  const ArgumentTrainOptions aopt = argument_options(config);
  const DetectionModelConfig dcfg = detection_model_config(config);
  const ArgumentModelConfig acfg = argument_model_config(config);

  DetectionModel model(dcfg);
  ArgumentModel arg_model(acfg);
  ContinualState state{MemoryStore(dopt.memory_size), {}};
  ArgumentMemory arg_memory(aopt.memory_size);
  result.matrix = F1Matrix(k);

  int start = 1;
  for (int s = 1; s <= k && fs::exists(stage_dir(dir, s) / "state.json"); ++s) {
    const auto st = read_json(stage_dir(dir, s) / "state.json");
    StageReport report = StageReport::from_json(st.at("report"));
    for (int j = 1; j <= s; ++j) result.matrix.set(s, j, report.task_f1.at(static_cast<std::size_t>(j - 1)));
    result.reports.push_back(std::move(report));
    state.type_counts = st.at("type_counts").get<std::map<std::string, int>>();
    start = s + 1;
  }
  if (start > 1) {
    const fs::path last = stage_dir(dir, start - 1);
    try {
      model = DetectionModel::load((last / "detector.ckpt").string());
      if (with_arguments) arg_model = ArgumentModel::load((last / "arguments.ckpt").string());
    } catch (const CheckpointError& e) {
      throw CheckpointError("cannot resume from " + last.string() + ": " + e.what());
    }
    state.memory = MemoryStore::from_json(read_json(last / "memory.json"));
    if (with_arguments) arg_memory = ArgumentMemory::from_json(read_json(last / "arg_memory.json"));
    result.resumed_stages = start - 1;
    spdlog::info("resuming {} after stage {}", dir.string(), start - 1);
  }

  for (int stage = start; stage <= k; ++stage) {
    const auto& task = stream.tasks[static_cast<std::size_t>(stage - 1)];
    const fs::path sdir = stage_dir(dir, stage);
    fs::create_directories(sdir);
    StageLog log;
    std::vector<EpochLog> arg_curve;
    if (config.strategy == Strategy::kJointTraining) {
      model = DetectionModel(dcfg);
      std::map<std::string, int> counts;
      log = train_joint(model, stream, stage, dopt, counts);
      state.type_counts = introduced_counts(stream, stage);
      if (with_arguments) {
        arg_model = ArgumentModel(acfg);
        ArgumentMemory none(0);
        arg_curve = train_argument_task(arg_model, joint_training_view(stream, stage), stream.seen_types(stage),
                                        stream.schema, none, aopt, stage)
                        .curve;
      }
    } else {
      std::optional<ModelSnapshot> teacher;
      if (config.strategy == Strategy::kFull && stage > 1) teacher.emplace(model);
      log = train_task(model, teacher ? &*teacher : nullptr, task, accumulated_dev(stream, stage), state, dopt, stage);
      if (with_arguments) {
        std::vector<TokenizedSentence> train;
        for (const auto& inst : task.train) train.push_back(inst.visible);
        arg_curve = train_argument_task(arg_model, train, task.types, stream.schema, arg_memory, aopt, stage).curve;
      }
    }

    const auto seen = stream.seen_types(stage);
    const std::set<std::string> seen_set(seen.begin(), seen.end());
    std::vector<TokenizedSentence> gold;
    for (const auto& s : accumulated_test(stream, stage)) gold.push_back(restrict_to_types(s, seen_set));
    auto predictions = detect_all(model, gold);
    if (with_arguments) predictions = extract_all(arg_model, predictions);
    StageReport report = score_stage(stream, stage, predictions, with_arguments, config.long_tail_fraction, gold);
    for (int j = 1; j <= stage; ++j) result.matrix.set(stage, j, report.task_f1[static_cast<std::size_t>(j - 1)]);
    spdlog::info("[{}] stage {}/{}: detection F1 {:.4f}{}", to_string(config.strategy), stage, k, report.detection.f1,
                 report.arguments ? fmt::format(", argument F1 {:.4f}", report.arguments->f1) : "");

    model.save((sdir / "detector.ckpt").string());
    if (with_arguments) arg_model.save((sdir / "arguments.ckpt").string());
    write_text(sdir / "memory.json", state.memory.to_json().dump());
    write_text(sdir / "arg_memory.json", arg_memory.to_json().dump());
    write_text(sdir / "prototypes.json", log.prototypes.to_json().dump());
    write_text(sdir / "pseudo_labels.jsonl", pseudo_label_lines(log.pseudo_labels));
    std::vector<EpochLog> curve = log.curve;
    curve.insert(curve.end(), arg_curve.begin(), arg_curve.end());
    write_curve_csv(curve, (sdir / "curve.csv").string());
    write_predictions(predictions, (sdir / "predictions.jsonl").string());
    nlohmann::json st = {{"stage", stage},
                         {"report", report.to_json()},
                         {"type_counts", state.type_counts},
                         {"best_epoch", log.best_epoch},
                         {"long_tail", log.long_tail}};
    write_text(sdir / "state.json", st.dump(2));
    result.reports.push_back(std::move(report));
  }

  result.summary = summary_json(result.reports, result.matrix);
  result.summary["strategy"] = to_string(config.strategy);
  result.summary["permutation_seed"] = config.permutation_seed;
  result.summary["model_seed"] = config.model_seed;
  write_report_csv(result.reports, (dir / "report.csv").string());
  write_text(dir / "summary.json", result.summary.dump(2));
  return result;
}

nlohmann::json aggregate_summaries(const std::vector<nlohmann::json>& summaries) {
  std::map<std::string, std::vector<double>> values;
  for (const auto& s : summaries) {
    for (const char* key : {"final_detection_f1", "final_argument_f1", "final_long_tail_f1", "bwt"}) {
      if (s.contains(key) && s.at(key).is_number()) values[key].push_back(s.at(key).get<double>());
    }
    if (s.contains("stages")) {
      for (const auto& st : s.at("stages")) {
        const std::string prefix = "stage_" + std::to_string(st.at("stage").get<int>()) + "_";
        values[prefix + "detection_f1"].push_back(st.at("detection").at("f1").get<double>());
        if (st.at("arguments").is_object()) values[prefix + "argument_f1"].push_back(st.at("arguments").at("f1").get<double>());
      }
    }
  }
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& [name, vs] : values) {
    double mean = 0.0;
    for (double v : vs) mean += v;
    mean /= static_cast<double>(vs.size());
    double var = 0.0;
    for (double v : vs) var += (v - mean) * (v - mean);
    const double std = vs.size() > 1 ? std::sqrt(var / static_cast<double>(vs.size() - 1)) : 0.0;
    metrics[name] = {{"mean", mean}, {"std", std}, {"values", vs}};
  }
  return {{"runs", summaries.size()}, {"metrics", metrics}};
}

SweepResult sweep(const RunConfig& config, int permutations) {
  if (permutations < 1) throw ConfigError("permutations must be >= 1");
  SweepResult result;
  std::vector<nlohmann::json> summaries;
  nlohmann::json failures = nlohmann::json::array();
  for (int p = 0; p < permutations; ++p) {
    RunConfig c = config;
    c.permutation_seed = config.permutation_seed + static_cast<std::uint64_t>(p);
    c.output_dir = (fs::path(config.output_dir) / ("perm_" + std::to_string(p))).string();
    try {
      result.runs.push_back(run(c));
      summaries.push_back(result.runs.back().summary);
    } catch (const std::exception& e) {
      spdlog::error("permutation {} failed: {}", p, e.what());
      failures.push_back({{"permutation", p}, {"error", e.what()}});
    }
  }
  result.aggregate = aggregate_summaries(summaries);
  result.aggregate["failures"] = failures;
  fs::create_directories(config.output_dir);
  write_text(fs::path(config.output_dir) / "aggregate.json", result.aggregate.dump(2));
  if (!failures.empty()) throw std::runtime_error(std::to_string(failures.size()) + " permutation run(s) failed");
  return result;
}

nlohmann::json evaluate_files(const std::string& predictions, const std::string& gold) {
  const Corpus g = load_corpus(gold);
  const Corpus p = load_corpus(predictions);
  auto prf = [](const Prf& x) {
    return nlohmann::json{{"precision", x.precision}, {"recall", x.recall}, {"f1", x.f1},
                          {"correct", x.correct},     {"predicted", x.predicted}, {"gold", x.gold}};
  };
  return {{"detection", prf(detection_f1(p.sentences, g.sentences))},
          {"arguments", prf(argument_f1(p.sentences, g.sentences))}};
}

}  // namespace scr
