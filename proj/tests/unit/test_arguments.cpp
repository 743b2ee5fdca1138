#include "scr/arguments.hpp"
#include "scr/eval.hpp"

#include "../support/gradcheck.hpp"
#include "../support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

using scr::Matrix;
using scr::Span;

namespace {

Matrix random_matrix(int r, int c, scr::Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

// Every tag sequence of length n over {O, B, I}.
std::vector<std::vector<int>> all_paths(int n) {
  std::vector<std::vector<int>> out;
  const int total = static_cast<int>(std::pow(3, n));
  for (int code = 0; code < total; ++code) {
    std::vector<int> p(n);
    int c = code;
    for (int t = 0; t < n; ++t) {
      p[t] = c % 3;
      c /= 3;
    }
    out.push_back(p);
  }
  return out;
}

double path_score(const Matrix& em, const Matrix& tr, const Matrix& st, const Matrix& en, const std::vector<int>& p) {
  double s = st(0, p[0]) + en(0, p.back());
  for (std::size_t t = 0; t < p.size(); ++t) {
    s += em(t, p[t]);
    if (t > 0) s += tr(p[t - 1], p[t]);
  }
  return s;
}

bool valid_bio(const std::vector<int>& p) {
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (p[t] == scr::kTagI && (t == 0 || p[t - 1] == scr::kTagO)) return false;
  }
  return true;
}

scr::ArgumentModelConfig toy_argument_config(std::uint64_t seed = 5) {
  scr::ArgumentModelConfig c;
  c.encoder.n_layers = 1;
  c.encoder.attention_layers = 1;
  c.encoder.vocab_buckets = 4096;
  c.feature_dim = 32;
  c.tagger.encoder.vocab_buckets = 4096;
  c.tagger.rnn_dim = 16;
  c.seed = seed;
  return c;
}

scr::Corpus argument_corpus(int types, int max_count, int min_count, std::uint64_t seed = 7) {
  scr::SyntheticOptions o;
  o.n_types = types;
  o.instances_per_type = scr::power_law_counts(types, max_count, min_count);
  o.vocab_size = 3 * types + 60;
  o.seed = seed;
  return scr::generate_synthetic(o);
}

std::vector<scr::TokenizedSentence> visible_train(const scr::TaskData& task) {
  std::vector<scr::TokenizedSentence> out;
  for (const auto& inst : task.train) out.push_back(inst.visible);
  return out;
}

}  // namespace

TEST(Bio, EncodeDecodeRoundTrip) {
  const std::vector<Span> spans{{0, 1}, {3, 3}, {5, 7}};
  const auto tags = scr::bio_encode(9, spans);
  EXPECT_EQ(tags, (std::vector<int>{1, 2, 0, 1, 0, 1, 2, 2, 0}));
  EXPECT_EQ(scr::bio_decode(tags), spans);
  EXPECT_TRUE(scr::bio_decode(std::vector<int>(4, scr::kTagO)).empty());
}

TEST(Bio, StrayInsideOpensSpan) {
  EXPECT_EQ(scr::bio_decode({2, 2, 0, 2}), (std::vector<Span>{{0, 1}, {3, 3}}));
}

TEST(Bio, RejectsOverlapAndOutOfRange) {
  EXPECT_THROW(scr::bio_encode(5, {{0, 2}, {2, 3}}), scr::ArgumentError);
  EXPECT_THROW(scr::bio_encode(3, {{1, 3}}), scr::ArgumentError);
}

TEST(Crf, NllMatchesPathEnumeration) {
  scr::Rng rng(11);
  for (int n = 1; n <= 4; ++n) {
    const Matrix em = random_matrix(n, 3, rng), tr = random_matrix(3, 3, rng);
    const Matrix st = random_matrix(1, 3, rng), en = random_matrix(1, 3, rng);
    const auto paths = all_paths(n);
    double z = 0.0;
    for (const auto& p : paths) z += std::exp(path_score(em, tr, st, en, p));
    for (const auto& gold : {paths.front(), paths[paths.size() / 2], paths.back()}) {
      const double expected = std::log(z) - path_score(em, tr, st, en, gold);
      const double got = scr::crf_nll(scr::ag::constant(em), scr::ag::constant(tr), scr::ag::constant(st),
                                      scr::ag::constant(en), gold)
                             .item();
      EXPECT_NEAR(got, expected, 1e-9) << "n=" << n;
    }
  }
}

TEST(Crf, NllGradient) {
  scr::Rng rng(12);
  auto em = scr::nn::make_parameter(random_matrix(4, 3, rng));
  auto tr = scr::nn::make_parameter(random_matrix(3, 3, rng));
  auto st = scr::nn::make_parameter(random_matrix(1, 3, rng));
  auto en = scr::nn::make_parameter(random_matrix(1, 3, rng));
  const std::vector<int> gold{1, 2, 0, 1};
  const auto r = testing_support::grad_check({{"em", em}, {"tr", tr}, {"st", st}, {"en", en}},
                                             [&] { return scr::crf_nll(em, tr, st, en, gold); });
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

TEST(Crf, ViterbiIsBestValidPath) {
  scr::Rng rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 5;
    const Matrix em = random_matrix(n, 3, rng, 2.0), tr = random_matrix(3, 3, rng);
    const Matrix st = random_matrix(1, 3, rng), en = random_matrix(1, 3, rng);
    double best = -std::numeric_limits<double>::infinity();
    std::vector<int> argbest;
    for (const auto& p : all_paths(n)) {
      if (!valid_bio(p)) continue;
      const double s = path_score(em, tr, st, en, p);
      if (s > best) {
        best = s;
        argbest = p;
      }
    }
    const auto got = scr::viterbi_decode(em, tr, st, en);
    EXPECT_TRUE(valid_bio(got));
    EXPECT_EQ(got, argbest);
  }
}

TEST(Crf, ForbidsInsideAfterOutsideEvenWhenEmissionsWantIt) {
  Matrix em = Matrix::Zero(3, 3);
  em(0, scr::kTagO) = 5;
  em(1, scr::kTagI) = 5;
  em(2, scr::kTagI) = 5;
  em(0, scr::kTagI) = 9;
  const Matrix z3 = Matrix::Zero(3, 3), z1 = Matrix::Zero(1, 3);
  const auto tags = scr::viterbi_decode(em, z3, z1, z1);
  EXPECT_TRUE(valid_bio(tags));
}

TEST(Crf, AllOutsideEmissionsDecodeToNoSpans) {
  Matrix em = Matrix::Zero(5, 3);
  em.col(scr::kTagO).setConstant(10.0);
  const auto tags = scr::viterbi_decode(em, Matrix::Zero(3, 3), Matrix::Zero(1, 3), Matrix::Zero(1, 3));
  EXPECT_TRUE(scr::bio_decode(tags).empty());
}

TEST(RoleLoss, MatchesOracle) {
  scr::Rng rng(14);
  for (int cands = 1; cands <= 3; ++cands) {
    oracle::Rows probs;
    std::vector<int> gold;
    std::uniform_int_distribution<int> label(0, 2);
    for (int i = 0; i < cands; ++i) {
      std::vector<double> z(3);
      for (double& v : z) v = std::normal_distribution<double>(0, 1.5)(rng);
      probs.push_back(oracle::softmax(z));
      gold.push_back(label(rng));
    }
    Matrix p(cands, 3);
    for (int i = 0; i < cands; ++i)
      for (int j = 0; j < 3; ++j) p(i, j) = probs[i][j];
    EXPECT_NEAR(scr::role_loss(p, gold), oracle::role(probs, gold), 1e-9);
  }
}

TEST(RoleLoss, PerfectAndUniform) {
  Matrix perfect = Matrix::Zero(2, 3);
  perfect(0, 1) = 1;
  perfect(1, 0) = 1;
  const std::vector<int> gold{1, 0};
  EXPECT_NEAR(scr::role_loss(perfect, gold), 0.0, 1e-12);
  const Matrix uniform = Matrix::Constant(2, 4, 0.25);
  EXPECT_NEAR(scr::role_loss(uniform, gold), std::log(4.0), 1e-12);
  const std::vector<int> bad{3};
  EXPECT_THROW(scr::role_loss(Matrix::Constant(1, 3, 1.0 / 3), bad), scr::ArgumentError);
}

TEST(Candidate, ConcatenatesStartAndEnd) {
  scr::Rng rng(15);
  const Matrix f = random_matrix(5, 4, rng);
  const Matrix one = scr::encode_candidate(f, {2, 2});
  ASSERT_EQ(one.cols(), 8);
  for (int j = 0; j < 4; ++j) {
    EXPECT_EQ(one(0, j), f(2, j));
    EXPECT_EQ(one(0, 4 + j), f(2, j));
  }
  const Matrix two = scr::encode_candidate(f, {1, 3});
  for (int j = 0; j < 4; ++j) {
    EXPECT_EQ(two(0, j), f(1, j));
    EXPECT_EQ(two(0, 4 + j), f(3, j));
  }
}

TEST(ArgumentModel, RoleLossGradient) {
  auto cfg = toy_argument_config();
  cfg.encoder.n_layers = 1;
  cfg.feature_dim = 8;
  scr::ArgumentModel model(cfg);
  scr::Rng rng(16);
  model.add_head("Attack", {"Agent", "Place"}, rng);
  const std::vector<std::string> tokens{"a", "b", "c", "d"};
  const std::vector<Span> spans{{0, 0}, {1, 2}, {3, 3}};
  const std::vector<int> gold{1, 0, 2};
  std::vector<std::pair<std::string, scr::ag::Var>> params;
  for (const auto& p : model.parameters()) {
    if (p.name.rfind("tagger.", 0) != 0) params.emplace_back(p.name, p.var);
  }
  auto loss = [&] {
    scr::Rng drop(3);
    const auto f = model.features(tokens, scr::Mode::kTrain, &drop);
    return scr::role_loss(model.role_probs(f, spans, "Attack"), gold);
  };
  const auto r = testing_support::grad_check(params, loss, 6, 1e-5, 1e-4);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(EntityTagger, LossGradient) {
  scr::TaggerConfig cfg;
  cfg.rnn_dim = 6;
  cfg.seed = 4;
  scr::EntityTagger tagger(cfg);
  const std::vector<std::string> tokens{"x", "y", "z", "w"};
  std::vector<std::pair<std::string, scr::ag::Var>> params;
  for (const auto& p : tagger.parameters()) params.emplace_back(p.name, p.var);
  auto loss = [&] {
    scr::Rng drop(5);
    return tagger.loss(tokens, {{1, 2}}, scr::Mode::kTrain, &drop);
  };
  const auto r = testing_support::grad_check(params, loss, 6, 1e-5, 1e-4);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(EntityTagger, UntrainedTaggerRefusesToTag) {
  scr::EntityTagger tagger{scr::TaggerConfig{}};
  EXPECT_THROW(tagger.tag({"a", "b"}), scr::ArgumentError);
}

TEST(EntityTagger, MemorizesOneSentence) {
  scr::TaggerConfig cfg;
  cfg.seed = 6;
  cfg.encoder.dropout_rate = 0.0;
  scr::EntityTagger tagger(cfg);
  const std::vector<std::string> tokens{"the", "red", "car", "hit", "a", "wall", "near", "old", "town", "hall"};
  const std::vector<Span> gold{{1, 2}, {5, 5}, {7, 9}};
  scr::nn::AdamOptions ao;
  ao.lr = 1e-2;
  scr::nn::Adam opt(scr::nn::vars_of(tagger.parameters()), ao);
  scr::Rng drop(7);
  for (int step = 0; step < 150; ++step) {
    opt.zero_grad();
    auto l = tagger.loss(tokens, gold, scr::Mode::kTrain, &drop);
    scr::ag::backward(l);
    opt.step();
  }
  tagger.mark_trained();
  EXPECT_EQ(tagger.tag(tokens), gold);
}

TEST(ExtractArguments, EmptyAndMissingHead) {
  scr::ArgumentModel model(toy_argument_config());
  model.tagger().mark_trained();
  EXPECT_TRUE(scr::extract_arguments(model, {"a", "b"}, {}).empty());
  const std::vector<scr::EventMention> detected{{{0, 0}, "Attack", {}}};
  EXPECT_THROW(scr::extract_arguments(model, {"a", "b"}, detected), scr::ArgumentError);
}

TEST(ExtractArguments, OnlyDetectedTypesCarryArguments) {
  scr::ArgumentModel model(toy_argument_config());
  scr::Rng rng(1);
  model.add_head("Attack", {"Agent"}, rng);
  model.add_head("Move", {"Origin"}, rng);
  model.tagger().mark_trained();
  const std::vector<scr::EventMention> detected{{{1, 1}, "Attack", {}}};
  const auto out = scr::extract_arguments(model, {"a", "b", "c", "d"}, detected);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].event_type, "Attack");
  for (const auto& a : out[0].arguments) EXPECT_EQ(a.role, "Agent");
}

TEST(ArgumentModel, AddingHeadKeepsOldHeads) {
  scr::ArgumentModel model(toy_argument_config());
  scr::Rng rng(2);
  model.add_head("Attack", {"Agent", "Place"}, rng);
  const std::vector<std::string> tokens{"p", "q", "r"};
  const std::vector<Span> spans{{0, 0}, {2, 2}};
  scr::ag::NoGradGuard g;
  const Matrix before = model.role_probs(model.features(tokens, scr::Mode::kEval, nullptr), spans, "Attack").value();
  model.add_head("Move", {"Origin"}, rng);
  const Matrix after = model.role_probs(model.features(tokens, scr::Mode::kEval, nullptr), spans, "Attack").value();
  EXPECT_EQ(before, after);
  EXPECT_EQ(model.head_labels("Move"), (std::vector<std::string>{scr::kNoRole, "Origin"}));
}

TEST(ArgumentModel, SaveLoadRoundTrip) {
  scr::ArgumentModel model(toy_argument_config());
  scr::Rng rng(3);
  model.add_head("Attack", {"Agent"}, rng);
  const auto path = std::filesystem::temp_directory_path() / "scr_args_roundtrip.ckpt";
  model.save(path.string());
  const auto loaded = scr::ArgumentModel::load(path.string());
  std::filesystem::remove(path);
  const std::vector<std::string> tokens{"u", "v"};
  scr::ag::NoGradGuard g;
  EXPECT_EQ(model.role_probs(model.features(tokens, scr::Mode::kEval, nullptr), {{0, 1}}, "Attack").value(),
            loaded.role_probs(loaded.features(tokens, scr::Mode::kEval, nullptr), {{0, 1}}, "Attack").value());
}

TEST(ArgumentMemory, BoundsAndJson) {
  scr::ArgumentMemory mem(2);
  scr::ArgumentExemplar e{"s1", "Attack", 1, {}};
  e.sentence.id = "s1";
  e.sentence.tokens = {"a"};
  EXPECT_THROW(mem.update({{"Attack", {e, e, e}}}), scr::ArgumentError);
  EXPECT_THROW(mem.update({{"Move", {e}}}), scr::ArgumentError);
  mem.update({{"Attack", {e}}});
  EXPECT_THROW(mem.update({{"Attack", {e}}}), scr::ArgumentError);
  const auto back = scr::ArgumentMemory::from_json(mem.to_json());
  EXPECT_EQ(back.capacity(), 2);
  EXPECT_EQ(back.exemplars("Attack"), mem.exemplars("Attack"));
  EXPECT_THROW(scr::ArgumentMemory(-1), scr::ArgumentError);
}

// Roles are cued by the word before each entity; the toy encoder needs a few
// hundred events before it stops memorizing entity words instead.
TEST(TrainArgumentTask, StageOneSeparableData) {
  const auto corpus = argument_corpus(3, 300, 200);
  const auto stream = scr::partition_tasks(corpus.schema, corpus.sentences, 1, 0);
  scr::ArgumentModel model(toy_argument_config());
  scr::ArgumentMemory memory(5);
  scr::ArgumentTrainOptions opt;
  opt.adam.lr = 5e-3;
  opt.epochs = 20;
  opt.tagger_epochs = 10;
  opt.memory_size = 5;
  scr::train_argument_task(model, visible_train(stream.tasks[0]), stream.tasks[0].types, stream.schema, memory, opt, 1);
  const auto& test = stream.tasks[0].test;
  const auto pred = scr::extract_all(model, test);
  const double f1 = scr::argument_f1(pred, test).f1;
  EXPECT_GE(f1, 0.8);
  for (const auto& type : stream.tasks[0].types) {
    EXPECT_LE(memory.exemplars(type).size(), 5u);
    EXPECT_FALSE(memory.exemplars(type).empty());
    for (const auto& ex : memory.exemplars(type)) {
      for (const auto& ev : ex.sentence.events) EXPECT_EQ(ev.event_type, type);
    }
  }
}

TEST(TrainArgumentTask, ZeroMemoryStoresNothing) {
  const auto corpus = argument_corpus(2, 20, 10);
  const auto stream = scr::partition_tasks(corpus.schema, corpus.sentences, 1, 0);
  scr::ArgumentModel model(toy_argument_config());
  scr::ArgumentMemory memory(0);
  scr::ArgumentTrainOptions opt;
  opt.epochs = 1;
  opt.tagger_epochs = 1;
  opt.memory_size = 0;
  scr::train_argument_task(model, visible_train(stream.tasks[0]), stream.tasks[0].types, stream.schema, memory, opt, 1);
  EXPECT_EQ(memory.total(), 0u);
  for (const auto& t : stream.tasks[0].types) EXPECT_TRUE(model.has_head(t));
}

// Five stages of argument training with gold event types given; task-1 test
// arguments after the last stage, with and without replay.
TEST(TrainArgumentTask, ReplayReducesForgettingOfFirstTask) {
  const auto corpus = argument_corpus(10, 200, 60);
  const auto stream = scr::partition_tasks(corpus.schema, corpus.sentences, 5, 0);
  auto final_task1_f1 = [&](int m) {
    scr::ArgumentModel model(toy_argument_config());
    scr::ArgumentMemory memory(m);
    scr::ArgumentTrainOptions opt;
    opt.adam.lr = 5e-3;
    opt.epochs = 10;
    opt.tagger_epochs = 8;
    opt.memory_size = m;
    opt.seed = 9;
    for (int s = 1; s <= stream.size(); ++s) {
      const auto& task = stream.tasks[static_cast<std::size_t>(s - 1)];
      scr::train_argument_task(model, visible_train(task), task.types, stream.schema, memory, opt, s);
    }
    const std::set<std::string> first(stream.tasks[0].types.begin(), stream.tasks[0].types.end());
    std::vector<scr::TokenizedSentence> gold;
    for (const auto& s : stream.tasks[0].test) gold.push_back(scr::restrict_to_types(s, first));
    return scr::argument_f1(scr::extract_all(model, gold), gold).f1;
  };
  const double without = final_task1_f1(0);
  const double with = final_task1_f1(10);
  RecordProperty("f1_m0", std::to_string(without));
  RecordProperty("f1_m10", std::to_string(with));
  EXPECT_GT(with, without);
}
