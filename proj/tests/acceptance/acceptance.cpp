// Acceptance suite: one PASS/FAIL line per criterion. The end-to-end runs
// (criterion 7) are executed first because criteria 5, 6 and 8 also inspect
// their artifacts.

#include "scr/arguments.hpp"
#include "scr/eval.hpp"
#include "scr/losses.hpp"
#include "scr/memory.hpp"
#include "scr/pipeline.hpp"
#include "scr/prototype.hpp"
#include "scr/trainer.hpp"

#include "../support/fixtures.hpp"
#include "../support/gradcheck.hpp"
#include "../support/oracles.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using scr::Matrix;
using scr::Vector;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

// Collects failed sub-checks of one criterion.
struct Report {
  std::vector<std::string> failures;
  std::vector<std::string> notes;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void note(const std::string& n) { notes.push_back(n); }
};

int emit(int id, const std::string& title, const Report& r) {
  const bool ok = r.failures.empty();
  std::printf("criterion %d %s: %s\n", id, ok ? "PASS" : "FAIL", title.c_str());
  for (const auto& n : r.notes) std::printf("    %s\n", n.c_str());
  for (const auto& f : r.failures) std::printf("    failed: %s\n", f.c_str());
  std::fflush(stdout);
  return ok ? 0 : 1;
}

Matrix to_matrix(const oracle::Rows& rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

oracle::Rows to_rows(const Matrix& m) {
  oracle::Rows out(m.rows(), std::vector<double>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

oracle::Rows random_probs(int n, int c, scr::Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.5);
  oracle::Rows out;
  for (int i = 0; i < n; ++i) {
    std::vector<double> z(c);
    for (double& v : z) v = g(rng);
    out.push_back(oracle::softmax(z));
  }
  return out;
}

oracle::Rows random_rows(int n, int c, scr::Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  oracle::Rows out(n, std::vector<double>(c));
  for (auto& r : out)
    for (double& v : r) v = g(rng);
  return out;
}

// --- end-to-end suite ------------------------------------------------------

struct Variant {
  std::string name;
  std::function<void(scr::RunConfig&)> apply;
};

const std::vector<Variant>& variants() {
  static const std::vector<Variant> v{
      {"full", [](scr::RunConfig&) {}},
      {"fine-tuning", [](scr::RunConfig& c) { c.strategy = scr::Strategy::kFineTuning; }},
      {"joint-training", [](scr::RunConfig& c) { c.strategy = scr::Strategy::kJointTraining; }},
      {"w/o DA", [](scr::RunConfig& c) { c.da = false; }},
      {"w/o AFD", [](scr::RunConfig& c) { c.afd = false; }},
      {"w/o SPD", [](scr::RunConfig& c) { c.spd = false; }},
      {"w/o PKD", [](scr::RunConfig& c) { c.pkd = false; }},
      {"w/o PKT", [](scr::RunConfig& c) { c.pkt = false; }},
  };
  return v;
}

const std::vector<std::uint64_t> kSeeds{1, 2, 3};

scr::RunConfig e2e_config(const fs::path& root, const Variant& v, std::uint64_t seed) {
  scr::RunConfig c;  // synthetic stream: 20 types, power-law counts 200..5, K = 5, m = 10
  c.feature_dim = 128;
  c.lr = 5e-3;
  c.epochs = 10;
  c.arguments = "off";
  c.permutation_seed = seed;
  c.model_seed = seed + 10;
  std::string dir = v.name;
  for (char& ch : dir)
    if (ch == '/' || ch == ' ') ch = '_';
  c.output_dir = (root / dir / ("seed_" + std::to_string(seed))).string();
  v.apply(c);
  return c;
}

struct E2E {
  std::map<std::string, std::vector<scr::RunResult>> runs;
  std::vector<std::string> errors;
  double seconds = 0.0;
};

E2E run_e2e(const fs::path& root, bool reuse) {
  E2E out;
  if (!reuse) fs::remove_all(root);
  const auto t0 = Clock::now();
  for (std::uint64_t seed : kSeeds) {
    for (const auto& v : variants()) {
      try {
        out.runs[v.name].push_back(scr::run(e2e_config(root, v, seed)));
      } catch (const std::exception& e) {
        out.errors.push_back(v.name + " seed " + std::to_string(seed) + ": " + e.what());
      }
    }
  }
  out.seconds = seconds_since(t0);
  return out;
}

std::optional<double> mean_of(const std::vector<scr::RunResult>& runs, const char* key) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : runs) {
    if (r.summary.contains(key) && r.summary.at(key).is_number()) {
      sum += r.summary.at(key).get<double>();
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

// --- criterion 1 -----------------------------------------------------------

Report loss_oracles() {
  Report r;
  const auto t0 = Clock::now();
  scr::Rng rng(101);
  double worst = 0.0;
  auto track = [&](double got, double want, const std::string& what) {
    const double d = std::abs(got - want);
    worst = std::max(worst, d);
    r.expect(d <= 1e-9, what + " differs by " + sci(d));
  };
  int cases = 0;
  for (int n = 1; n <= 3; ++n) {
    for (int c = 1; c <= 3; ++c) {
      for (int rep = 0; rep < 20; ++rep, ++cases) {
        const auto p = random_probs(n, c, rng);
        std::vector<int> y(n);
        for (int i = 0; i < n; ++i) y[i] = static_cast<int>(rng() % (c + 1)) - 1;
        track(scr::classification_loss(to_matrix(p), y), oracle::classification(p, y), "classification_loss");
        std::vector<int> gold(n);
        for (int i = 0; i < n; ++i) gold[i] = static_cast<int>(rng() % c);
        track(scr::role_loss(to_matrix(p), gold), oracle::role(p, gold), "role_loss");

        const auto s = random_rows(n, c, rng), t = random_rows(n, c, rng);
        std::vector<int> rows;
        for (int i = 0; i < n; ++i)
          if (rng() % 2) rows.push_back(i);
        track(scr::afd_loss(to_matrix(s), to_matrix(t), rows), oracle::afd(s, t, rows), "afd_loss");

        // student has one more class than the teacher; previous types are columns 1..c-1 of the teacher
        const auto sp = random_probs(n, c + 1, rng);
        auto tp = random_probs(n, c, rng);
        std::vector<int> cols;
        for (int j = 1; j < c; ++j) cols.push_back(j);
        const double spd = scr::spd_loss(to_matrix(sp), to_matrix(tp), rows, cols);
        for (auto& row : tp) row.push_back(0.0);
        track(spd, oracle::spd(sp, tp, rows, cols), "spd_loss");

        std::uniform_real_distribution<double> u(0.0, 3.0);
        const double lc = u(rng), la = u(rng), ls = u(rng), al = u(rng), be = u(rng);
        const int seen = 1 + static_cast<int>(rng() % 6);
        const int prev = static_cast<int>(rng() % (seen + 1));
        track(scr::combined_loss(lc, la, ls, prev, seen, {al, be}), oracle::combined(lc, la, ls, prev, seen, al, be),
              "combined_loss");
      }
    }
  }
  const double secs = seconds_since(t0);
  r.expect(secs < 5.0, "runtime " + fmt3(secs) + " s >= 5 s");
  r.note(std::to_string(cases) + " random instances per loss, max |diff| " + sci(worst) + ", " +
         fmt3(secs) + " s");
  return r;
}

// --- criteria 2 and 3: two-stage toy detection setup ------------------------

struct TwoStage {
  scr::DetectionModel teacher{testing_support::toy_detection_config()};
  scr::DetectionModel student{testing_support::toy_detection_config(16, 4)};
  std::vector<scr::LabeledSentence> batch;
  std::vector<scr::TeacherTargets> targets;
  scr::LossContext ctx;
  std::set<std::string> long_tail{"Die"};
  std::map<std::string, Vector> assoc;

  TwoStage() {
    scr::Rng rng(9);
    teacher.widen({"Attack", "Die"}, rng);
    student.widen({"Attack", "Die", "Marry"}, rng);
    using testing_support::labeled;
    batch = {labeled("a", {"troops", "attacked", "and", "wed"}, {"NA", "Attack", "NA", "Marry"}),
             labeled("b", {"he", "died"}, {"NA", "Die"}),
             labeled("c", {"she", "married", "him"}, {"NA", "Marry", "NA"})};
    for (const auto& s : batch) targets.push_back(scr::teacher_targets(teacher, s.tokens, 2));
    ctx.new_types = {"Marry"};
    ctx.n_prev_types = 2;
    ctx.weights = {0.7, 1.3};
    ctx.afd = ctx.spd = true;
    ctx.attention_layers = 2;
    assoc["Die"] = Vector::Constant(16, 0.3);
    ctx.long_tail = &long_tail;
    ctx.associated = &assoc;
  }
  std::vector<const scr::LabeledSentence*> batch_ptrs() const {
    std::vector<const scr::LabeledSentence*> out;
    for (const auto& s : batch) out.push_back(&s);
    return out;
  }
  std::vector<const scr::TeacherTargets*> target_ptrs() const {
    std::vector<const scr::TeacherTargets*> out;
    for (const auto& t : targets) out.push_back(&t);
    return out;
  }
};

std::vector<std::pair<std::string, scr::ag::Var>> named(const scr::nn::ParameterList& ps, const std::string& skip = "") {
  std::vector<std::pair<std::string, scr::ag::Var>> out;
  for (const auto& p : ps) {
    if (!skip.empty() && p.name.rfind(skip, 0) == 0) continue;
    out.emplace_back(p.name, p.var);
  }
  return out;
}

Report gradient_checks() {
  Report r;
  const auto t0 = Clock::now();
  auto check = [&](const std::string& what, const testing_support::GradCheckResult& g) {
    r.expect(g.max_rel_error < 1e-4, what + ": max relative error " + sci(g.max_rel_error) + " at " + g.worst);
    r.note(what + ": " + std::to_string(g.checked) + " entries, max relative error " + sci(g.max_rel_error));
  };

  {
    // classification + AFD + SPD + long-tail enhancement, through the whole toy model (d = 32)
    TwoStage s;
    auto loss = [&] {
      scr::Rng drop(21), noise(22);
      return scr::batch_loss(s.student, s.batch_ptrs(), s.target_ptrs(), s.ctx, scr::Mode::kTrain, &drop, &noise)
          .total;
    };
    check("detection combined loss", testing_support::grad_check(named(s.student.parameters()), loss, 6, 1e-5, 1e-4));
  }
  {
    scr::ArgumentModelConfig cfg;
    cfg.encoder.n_layers = 2;
    cfg.encoder.attention_layers = 2;
    cfg.encoder.d = 32;
    cfg.feature_dim = 8;
    cfg.seed = 5;
    scr::ArgumentModel model(cfg);
    scr::Rng rng(16);
    model.add_head("Attack", {"Agent", "Place"}, rng);
    const std::vector<std::string> tokens{"a", "b", "c", "d"};
    const std::vector<scr::Span> spans{{0, 0}, {1, 2}, {3, 3}};
    const std::vector<int> gold{1, 0, 2};
    auto loss = [&] {
      scr::Rng drop(3);
      return scr::role_loss(model.role_probs(model.features(tokens, scr::Mode::kTrain, &drop), spans, "Attack"), gold);
    };
    check("role loss", testing_support::grad_check(named(model.parameters(), "tagger."), loss, 6, 1e-5, 1e-4));
  }
  {
    scr::TaggerConfig cfg;
    cfg.encoder.d = 32;
    cfg.rnn_dim = 6;
    cfg.seed = 4;
    scr::EntityTagger tagger(cfg);
    const std::vector<std::string> tokens{"x", "y", "z", "w"};
    auto loss = [&] {
      scr::Rng drop(5);
      return tagger.loss(tokens, {{1, 2}}, scr::Mode::kTrain, &drop);
    };
    check("entity tagger CRF loss", testing_support::grad_check(named(tagger.parameters()), loss, 6, 1e-5, 1e-4));
  }
  const double secs = seconds_since(t0);
  r.expect(secs < 60.0, "runtime " + fmt3(secs) + " s >= 60 s");
  r.note("runtime " + fmt3(secs) + " s");
  return r;
}

Report distillation_identities() {
  Report r;
  TwoStage s;
  // frozen snapshot distilled against itself, on sentences of its own types
  const scr::ModelSnapshot snap(s.teacher);
  using testing_support::labeled;
  const std::vector<scr::LabeledSentence> old_batch{
      labeled("a", {"troops", "attacked", "the", "town"}, {"NA", "Attack", "NA", "NA"}),
      labeled("b", {"he", "died"}, {"NA", "Die"}), labeled("c", {"she", "married", "him"}, {"NA", "NA", "NA"})};
  std::vector<const scr::LabeledSentence*> old_ptrs;
  for (const auto& b : old_batch) old_ptrs.push_back(&b);
  std::vector<scr::TeacherTargets> self;
  for (const auto& b : old_batch) self.push_back(scr::teacher_targets(snap.model(), b.tokens, 2));
  std::vector<const scr::TeacherTargets*> self_ptrs;
  for (const auto& t : self) self_ptrs.push_back(&t);
  scr::LossContext ctx = s.ctx;
  ctx.new_types = {};
  ctx.n_prev_types = 2;
  ctx.long_tail = nullptr;
  ctx.associated = nullptr;
  const auto out = scr::batch_loss(snap.model(), old_ptrs, self_ptrs, ctx, scr::Mode::kEval, nullptr, nullptr);
  r.expect(std::abs(out.afd) <= 1e-12, "afd_loss(M, M) = " + std::to_string(out.afd));

  // SPD at student = teacher equals the teacher's own cross entropy over previous-type columns
  double entropy = 0.0;
  int rows = 0;
  for (std::size_t b = 0; b < old_batch.size(); ++b) {
    const Matrix& t = self[b].probs;
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (int c = 1; c <= 2; ++c) entropy -= t(i, c) * std::log(t(i, c));
      ++rows;
    }
  }
  entropy /= rows;
  r.expect(std::abs(out.spd - entropy) <= 1e-9,
           "spd_loss(M, M) = " + std::to_string(out.spd) + ", teacher entropy term " + std::to_string(entropy));

  // and any redistribution of the same previous-type mass raises it
  scr::Rng rng(5);
  const Matrix t = self[0].probs;
  std::vector<int> all_rows;
  for (Eigen::Index i = 0; i < t.rows(); ++i) all_rows.push_back(static_cast<int>(i));
  const std::vector<int> cols{1, 2};
  const double at_teacher = scr::spd_loss(t, t, all_rows, cols);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int raised = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Matrix sp = t;
    for (Eigen::Index i = 0; i < sp.rows(); ++i) {
      const double mass = t(i, 1) + t(i, 2);
      const double share = u(rng);
      sp(i, 1) = mass * share;
      sp(i, 2) = mass * (1 - share);
    }
    if (scr::spd_loss(sp, t, all_rows, cols) >= at_teacher - 1e-12) ++raised;
  }
  r.expect(raised == 200, std::to_string(200 - raised) + " of 200 redistributions went below the student=teacher value");

  // stage 1: combined loss is plain classification
  scr::LossContext first = s.ctx;
  first.n_prev_types = 0;
  const auto st1 = scr::batch_loss(s.student, s.batch_ptrs(), {}, first, scr::Mode::kEval, nullptr, nullptr);
  oracle::Rows probs;
  std::vector<int> labels;
  for (const auto& sent : s.batch) {
    const Matrix p = scr::classify_tokens(s.student, sent.tokens);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      probs.push_back(to_rows(p.row(i))[0]);
      labels.push_back(s.student.labels().index_of(sent.labels[i].type));
    }
  }
  const double cls = oracle::classification(probs, labels);
  r.expect(std::abs(st1.total.item() - cls) <= 1e-9, "stage-1 combined loss " + std::to_string(st1.total.item()) +
                                                         " vs classification " + std::to_string(cls));
  r.expect(scr::combined_loss(0.9, 5.0, 5.0, 0, 4, {}) == 0.9, "combined_loss with rho = 0");
  r.note("afd(M,M) = " + sci(out.afd) + ", spd(M,M) - teacher entropy term = " + sci(out.spd - entropy));
  return r;
}

// --- criterion 4 -----------------------------------------------------------

Report prototype_suite() {
  Report r;
  scr::Rng rng(1);
  std::normal_distribution<double> g(0.5, 2.0);
  for (int n : {1, 2, 5, 17}) {
    Matrix f(n, 6);
    for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = g(rng);
    const auto p = scr::compute_prototype("T", f);
    const auto mu = oracle::column_mean(to_rows(f));
    const auto sd = oracle::column_std(to_rows(f));
    for (int k = 0; k < 6; ++k) {
      r.expect(std::abs(p.mu(k) - mu[k]) <= 1e-9, "prototype mean, n=" + std::to_string(n));
      r.expect(std::abs(p.sigma(k) - sd[k]) <= 1e-9, "prototype std, n=" + std::to_string(n));
    }
  }

  scr::PrototypeStore store;
  std::vector<std::vector<double>> mus, sigmas;
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> pos(0.1, 2.0);
  for (int t = 0; t < 6; ++t) {
    std::vector<double> mu(5), sd(5);
    for (auto& v : mu) v = n01(rng);
    for (auto& v : sd) v = pos(rng);
    mus.push_back(mu);
    sigmas.push_back(sd);
    store.put({"T" + std::to_string(t), Eigen::Map<const Vector>(mu.data(), 5), Eigen::Map<const Vector>(sd.data(), 5), 3});
  }
  for (int t = 0; t < 6; ++t) {
    std::vector<std::vector<double>> om, os;
    for (int o = 0; o < 6; ++o) {
      if (o == t) continue;
      om.push_back(mus[o]);
      os.push_back(sigmas[o]);
    }
    const auto want = oracle::associated_std(mus[t], om, os);
    const Vector got = scr::associated_std(store.at("T" + std::to_string(t)), store);
    for (int k = 0; k < 5; ++k) r.expect(std::abs(got(k) - want[k]) <= 1e-9, "associated std, type " + std::to_string(t));
  }

  const Vector sigma = (Vector(4) << 0.1, 0.5, 1.0, 2.0).finished();
  scr::Rng draw(42);
  const int draws = 10000;
  Matrix samples(draws, 4);
  for (int i = 0; i < draws; ++i) samples.row(i) = scr::sample_intensive_vector(sigma, draw).transpose();
  std::string stats;
  for (int k = 0; k < 4; ++k) {
    const double mean = samples.col(k).mean();
    const double sd = std::sqrt((samples.col(k).array() - mean).square().sum() / (draws - 1));
    r.expect(std::abs(mean) <= 0.05, "sample mean " + std::to_string(mean) + " in dim " + std::to_string(k));
    r.expect(std::abs(sd - sigma(k)) <= 0.05 * sigma(k),
             "sample std " + std::to_string(sd) + " vs " + std::to_string(sigma(k)));
    stats += " (" + fmt3(mean) + ", " + fmt3(sd) + "/" + fmt3(sigma(k)) + ")";
  }
  r.note("10000 draws, per-dimension (mean, std/target):" + stats);

  Matrix f = Matrix::Random(3, 4);
  const std::map<std::string, Vector> zero{{"rare", Vector::Zero(4)}};
  const Matrix same = scr::enhance_long_tail(f, {"rare", "", "rare"}, zero, draw);
  r.expect((same.array() == f.array()).all(), "sigma = 0 changed the features");
  return r;
}

// --- criterion 5 -----------------------------------------------------------

Report memory_suite(const E2E& e2e) {
  Report r;
  const double centers[3][2] = {{0, 0}, {10, 0}, {0, 10}};
  int recovered = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    scr::Rng rng(seed);
    std::normal_distribution<double> g(0.0, 0.1);
    Matrix f(45, 2);
    for (int b = 0; b < 3; ++b)
      for (int i = 0; i < 15; ++i) {
        f(b * 15 + i, 0) = centers[b][0] + g(rng);
        f(b * 15 + i, 1) = centers[b][1] + g(rng);
      }
    const auto picked = scr::select_exemplar_indices(f, 3, seed);
    std::set<std::size_t> blobs;
    for (auto i : picked) blobs.insert(i / 15);
    if (picked.size() == 3 && blobs.size() == 3) ++recovered;
    r.expect(picked == scr::select_exemplar_indices(f, 3, seed), "selection not deterministic, seed " + std::to_string(seed));
  }
  r.expect(recovered == 20, "one exemplar per blob in " + std::to_string(recovered) + "/20 seeds");

  scr::MemoryStore mem(2);
  scr::Exemplar na;
  na.sentence_id = "x";
  na.event_type = scr::kNoneLabel;
  bool rejected = false;
  try {
    mem.update({{scr::kNoneLabel, {na}}});
  } catch (const scr::MemoryError&) {
    rejected = true;
  }
  r.expect(rejected, "memory accepted an NA exemplar");

  // every stored memory of every continual run
  int files = 0, exemplars = 0;
  for (const auto& [name, runs] : e2e.runs) {
    for (const auto& run : runs) {
      for (int s = 1; s <= 5; ++s) {
        const fs::path p = fs::path(run.run_dir) / ("stage_" + std::to_string(s)) / "memory.json";
        if (!fs::exists(p)) continue;
        std::ifstream in(p);
        const auto store = scr::MemoryStore::from_json(nlohmann::json::parse(in));
        ++files;
        for (const auto& type : store.types()) {
          const auto& ex = store.exemplars(type);
          r.expect(static_cast<int>(ex.size()) <= 10, name + ": " + type + " holds " + std::to_string(ex.size()));
          r.expect(type != scr::kNoneLabel, name + ": NA type stored");
          for (const auto& e : ex) {
            ++exemplars;
            const auto& label = e.sentence.labels.at(static_cast<std::size_t>(e.trigger.start));
            r.expect(!label.is_none() && e.event_type == type && label.type == type,
                     name + ": exemplar " + e.sentence_id + " is not a " + type + " trigger");
          }
        }
      }
    }
  }
  r.expect(files > 0, "no memory files from the end-to-end runs");
  r.note("k-means blobs recovered in " + std::to_string(recovered) + "/20 seeds; " + std::to_string(exemplars) +
         " stored exemplars checked in " + std::to_string(files) + " memory files (m = 10)");
  return r;
}

// --- criterion 6 -----------------------------------------------------------

Report pseudo_label_suite(const E2E& e2e) {
  Report r;
  scr::LabelSpace labels({"Marry", "Die"});
  auto s = testing_support::labeled("s", {"a", "b", "c", "d", "e"}, {"NA", "NA", "NA", "NA", "Attack"});
  Matrix p(5, 3);
  p << 0.15, 0.85, 0.0,  // above
      0.2, 0.0, 0.8,      // exactly tau
      0.200001, 0.799999, 0.0,  // just below
      0.5, 0.25, 0.25,    // below
      0.0, 0.99, 0.01;    // gold kept
  const auto changed = scr::apply_pseudo_labels(s, p, labels, 0.8);
  r.expect(changed == std::vector<int>({0, 1}), "threshold boundary: changed rows differ from {0, 1}");
  r.expect(s.labels[4].type == "Attack" && !s.labels[4].pseudo, "gold label overwritten");

  const auto it = e2e.runs.find("full");
  if (it == e2e.runs.end() || it->second.empty()) {
    r.expect(false, "no full-model runs to audit");
    return r;
  }
  long total = 0, correct = 0, below_tau = 0;
  std::map<int, std::pair<long, long>> by_stage;  // stage -> (correct, total)
  for (std::size_t k = 0; k < it->second.size(); ++k) {
    const auto& run = it->second[k];
    const auto cfg = e2e_config(fs::path(run.run_dir).parent_path().parent_path(), variants()[0], kSeeds[k]);
    const auto stream = scr::build_stream(cfg);
    // withheld gold: every trigger token of every event, visible or masked
    std::map<std::string, std::set<std::pair<int, std::string>>> gold;
    for (const auto& task : stream.tasks) {
      for (const auto& inst : task.train) {
        auto& g = gold[inst.visible.id];
        for (const auto* evs : {&inst.visible.events, &inst.masked}) {
          for (const auto& ev : *evs)
            for (int t = ev.trigger.start; t <= ev.trigger.end; ++t) g.insert({t, ev.event_type});
        }
      }
    }
    for (int st = 1; st <= stream.size(); ++st) {
      std::ifstream in(fs::path(run.run_dir) / ("stage_" + std::to_string(st)) / "pseudo_labels.jsonl");
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        ++total;
        if (j.at("confidence").get<double>() < 0.8) ++below_tau;
        const auto g = gold.find(j.at("sentence_id").get<std::string>());
        const bool hit = g != gold.end() && g->second.count({j.at("token").get<int>(), j.at("type").get<std::string>()});
        correct += hit;
        by_stage[st].first += hit;
        ++by_stage[st].second;
      }
    }
  }
  r.expect(total > 0, "no pseudo labels were produced");
  r.expect(below_tau == 0, std::to_string(below_tau) + " pseudo labels below tau");
  const double precision = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  r.expect(precision >= 0.7, "pseudo-label precision " + fmt3(precision) + " < 0.7");
  r.note("pseudo labels (tau = 0.8) over " + std::to_string(it->second.size()) + " full runs: " + std::to_string(correct) +
         "/" + std::to_string(total) + " match withheld gold, precision " + fmt3(precision));
  std::string stages = "per stage:";
  for (const auto& [st, ct] : by_stage) {
    stages += " " + std::to_string(st) + ": " + std::to_string(ct.first) + "/" + std::to_string(ct.second);
  }
  r.note(stages);
  return r;
}

// --- criterion 7 -----------------------------------------------------------

Report e2e_suite(const E2E& e2e) {
  Report r;
  for (const auto& e : e2e.errors) r.expect(false, "run failed: " + e);
  r.expect(e2e.seconds < 600.0, "end-to-end runtime " + fmt3(e2e.seconds) + " s >= 600 s");
  std::map<std::string, double> f1, bwt, lt;
  for (const auto& v : variants()) {
    const auto runs = e2e.runs.count(v.name) ? e2e.runs.at(v.name) : std::vector<scr::RunResult>{};
    const auto a = mean_of(runs, "final_detection_f1"), b = mean_of(runs, "bwt"), c = mean_of(runs, "final_long_tail_f1");
    if (!a || !b) {
      r.expect(false, v.name + ": no completed runs");
      continue;
    }
    f1[v.name] = *a;
    bwt[v.name] = *b;
    lt[v.name] = c.value_or(0.0);
    r.note(v.name + ": final F1 " + fmt3(*a) + ", BWT " + fmt3(*b) + ", long-tail F1 " + fmt3(c.value_or(0.0)) + " (mean of " +
           std::to_string(runs.size()) + " seeds)");
  }
  if (!r.failures.empty()) return r;
  const double full = f1.at("full");
  r.expect(full - f1.at("fine-tuning") >= 0.10,
           "(a) full exceeds fine-tuning by " + fmt3(full - f1.at("fine-tuning")) + " < 0.10");
  r.expect(bwt.at("full") > bwt.at("fine-tuning"), "(b) BWT full " + fmt3(bwt.at("full")) + " <= fine-tuning " +
                                                        fmt3(bwt.at("fine-tuning")));
  r.expect(f1.at("joint-training") >= full - 0.02,
           "(c) joint-training " + fmt3(f1.at("joint-training")) + " < full - 0.02");
  for (const char* ab : {"w/o DA", "w/o AFD", "w/o SPD", "w/o PKD", "w/o PKT"}) {
    r.expect(f1.at(ab) <= full, std::string("(d) ") + ab + " " + fmt3(f1.at(ab)) + " > full " + fmt3(full));
  }
  r.expect(lt.at("full") > lt.at("fine-tuning"),
           "(e) long-tail F1 full " + fmt3(lt.at("full")) + " <= fine-tuning " + fmt3(lt.at("fine-tuning")));
  r.note("8 configurations x " + std::to_string(kSeeds.size()) + " seeds in " + fmt3(e2e.seconds) + " s");
  return r;
}

// --- criterion 8 -----------------------------------------------------------

scr::TokenizedSentence sent(const std::string& id, int n, std::vector<scr::EventMention> events) {
  scr::TokenizedSentence s;
  s.id = id;
  for (int i = 0; i < n; ++i) s.tokens.push_back("w" + std::to_string(i));
  s.events = std::move(events);
  return s;
}

Report metric_suite(const E2E& e2e) {
  Report r;
  scr::F1Matrix m(3);
  m.set(1, 1, 0.8);
  m.set(2, 1, 0.6);
  m.set(2, 2, 0.7);
  m.set(3, 1, 0.5);
  m.set(3, 2, 0.4);
  m.set(3, 3, 0.9);
  // ((0.5 - 0.8) + (0.4 - 0.7)) / 2
  r.expect(std::abs(scr::bwt(m) - (-0.3)) <= 1e-12, "bwt hand case = " + std::to_string(scr::bwt(m)));
  scr::Rng rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 2; k <= 6; ++k) {
    scr::F1Matrix rm(k);
    std::vector<std::vector<double>> rows(k);
    for (int i = 1; i <= k; ++i)
      for (int j = 1; j <= i; ++j) {
        const double v = u(rng);
        rm.set(i, j, v);
        rows[i - 1].push_back(v);
      }
    r.expect(std::abs(scr::bwt(rm) - oracle::bwt(rows)) <= 1e-12, "bwt random K=" + std::to_string(k));
  }

  using EM = scr::EventMention;
  const std::vector<scr::TokenizedSentence> gold{
      sent("a", 6, {EM{{1, 1}, "Attack", {{{3, 4}, "Target"}, {{5, 5}, "Place"}}}, EM{{4, 4}, "Die", {}}}),
      sent("b", 5, {EM{{0, 1}, "Marry", {{{3, 3}, "Person"}}}}),
      sent("c", 4, {EM{{2, 2}, "Attack", {}}})};
  const std::vector<scr::TokenizedSentence> pred{
      sent("a", 6, {EM{{1, 1}, "Attack", {{{3, 4}, "Target"}, {{5, 5}, "Victim"}}}, EM{{4, 4}, "Attack", {}}}),
      sent("b", 5, {EM{{1, 1}, "Marry", {{{3, 3}, "Person"}}}}),
      sent("c", 4, {EM{{0, 0}, "Die", {}}})};
  // triggers: 1 of 4 predicted correct, 1 of 4 gold found; arguments: 2 of 3 and 2 of 3
  const auto d = scr::detection_f1(pred, gold);
  r.expect(d.correct == 1 && d.predicted == 4 && d.gold == 4 && std::abs(d.f1 - 0.25) < 1e-12,
           "detection hand counts");
  const auto a = scr::argument_f1(pred, gold);
  r.expect(a.correct == 2 && a.predicted == 3 && a.gold == 3 && std::abs(a.f1 - 2.0 / 3.0) < 1e-12,
           "argument hand counts");

  // stage-1 equality of full and fine-tuning under identical seeds
  const auto full = e2e.runs.find("full"), ft = e2e.runs.find("fine-tuning");
  int compared = 0;
  if (full != e2e.runs.end() && ft != e2e.runs.end()) {
    for (std::size_t k = 0; k < std::min(full->second.size(), ft->second.size()); ++k) {
      const auto m1 = scr::DetectionModel::load((fs::path(full->second[k].run_dir) / "stage_1" / "detector.ckpt").string());
      const auto m2 = scr::DetectionModel::load((fs::path(ft->second[k].run_dir) / "stage_1" / "detector.ckpt").string());
      const auto p1 = m1.parameters(), p2 = m2.parameters();
      bool same = p1.size() == p2.size();
      for (std::size_t i = 0; same && i < p1.size(); ++i) same = p1[i].var.value() == p2[i].var.value();
      same = same && full->second[k].reports[0].detection.f1 == ft->second[k].reports[0].detection.f1;
      r.expect(same, "stage-1 full and fine-tuning differ for seed " + std::to_string(kSeeds[k]));
      ++compared;
    }
  }
  r.expect(compared > 0, "no run pairs for the stage-1 equality check");
  r.note("bwt hand case -0.3, F1 hand counts, stage-1 parameters identical in " + std::to_string(compared) + " seed pairs");
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("acceptance criteria");
  std::string work = (fs::temp_directory_path() / "scr_acceptance").string();
  bool keep = false, reuse = false;
  app.add_option("--work-dir", work, "where the end-to-end runs are written");
  app.add_flag("--keep", keep, "keep the run directories");
  app.add_flag("--reuse", reuse, "resume existing run directories instead of starting fresh");
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::warn);

  std::printf("running end-to-end suite in %s ...\n", work.c_str());
  std::fflush(stdout);
  const E2E e2e = run_e2e(work, reuse);

  int failed = 0;
  failed += emit(1, "loss oracles", loss_oracles());
  failed += emit(2, "gradient checks", gradient_checks());
  failed += emit(3, "distillation identities", distillation_identities());
  failed += emit(4, "prototype suite", prototype_suite());
  failed += emit(5, "memory suite", memory_suite(e2e));
  failed += emit(6, "pseudo-label suite", pseudo_label_suite(e2e));
  failed += emit(7, "end-to-end behavioral regression", e2e_suite(e2e));
  failed += emit(8, "metric suite", metric_suite(e2e));
  std::printf("%d of 8 criteria passed\n", 8 - failed);
  if (!keep) fs::remove_all(work);
  return failed == 0 ? 0 : 1;
}
