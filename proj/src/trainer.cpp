#include "scr/trainer.hpp"

#include "scr/eval.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace scr {

void write_curve_csv(const std::vector<EpochLog>& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "stage,phase,epoch,loss,cls,afd,spd,dev_f1\n";
  for (const auto& e : curve) {
    out << e.stage << ',' << e.phase << ',' << e.epoch << ',' << e.loss << ',' << e.cls << ',' << e.afd << ','
        << e.spd << ',';
    if (e.dev_f1) out << *e.dev_f1;
    out << '\n';
  }
}

TeacherTargets teacher_targets(const DetectionModel& teacher, const std::vector<std::string>& tokens,
                               int attention_layers) {
  ag::NoGradGuard guard;
  const auto pass = teacher.encode(tokens, Mode::kEval, nullptr);
  TeacherTargets t;
  t.probs = teacher.classify(pass.features).value();
  t.attentive = attentive_features(pass.features.value(), context_attention(pass.encoded.values(), attention_layers));
  return t;
}

BatchLoss batch_loss(const DetectionModel& model, const std::vector<const LabeledSentence*>& batch,
                     const std::vector<const TeacherTargets*>& teachers, const LossContext& ctx, Mode mode,
                     Rng* dropout_rng, Rng* noise_rng) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  if (!teachers.empty() && teachers.size() != batch.size()) {
    throw std::invalid_argument("batch_loss: teacher targets not aligned with batch");
  }
  const bool distil = !teachers.empty() && ctx.n_prev_types > 0 && (ctx.afd || ctx.spd);
  const bool enhance = mode == Mode::kTrain && ctx.long_tail && ctx.associated && !ctx.long_tail->empty();
  if (enhance && !noise_rng) throw std::invalid_argument("batch_loss: enhancement needs a noise rng");

  std::vector<ag::Var> probs_parts;
  std::vector<ag::Var> attentive_parts;
  std::vector<int> labels;
  std::vector<int> old_rows;
  std::vector<Matrix> teacher_probs;
  std::vector<Matrix> teacher_attentive;
  int offset = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const LabeledSentence& s = *batch[b];
    const auto pass = model.encode(s.tokens, mode, dropout_rng);
    ag::Var f = pass.features;
    if (enhance) {
      std::vector<std::string> row_types(s.labels.size());
      bool any = false;
      for (std::size_t j = 0; j < s.labels.size(); ++j) {
        if (!s.labels[j].is_none() && ctx.long_tail->count(s.labels[j].type)) {
          row_types[j] = s.labels[j].type;
          any = true;
        }
      }
      if (any) f = ag::add(f, ag::constant(long_tail_noise(f.rows(), f.cols(), row_types, *ctx.associated, *noise_rng)));
    }
    probs_parts.push_back(model.classify(f));
    for (std::size_t j = 0; j < s.labels.size(); ++j) {
      const int idx = model.labels().index_of(s.labels[j].type);
      if (idx < 0) throw std::invalid_argument("label " + s.labels[j].type + " outside the model's label space");
      labels.push_back(idx);
      if (!ctx.new_types.count(s.labels[j].type)) old_rows.push_back(offset + static_cast<int>(j));
    }
    if (distil) {
      const TeacherTargets& t = *teachers[b];
      if (t.probs.rows() != static_cast<Eigen::Index>(s.tokens.size())) {
        throw std::invalid_argument("batch_loss: teacher targets for a different sentence");
      }
      teacher_probs.push_back(t.probs);
      if (ctx.afd) {
        attentive_parts.push_back(
            attentive_features(pass.features, context_attention(pass.encoded, ctx.attention_layers)));
        teacher_attentive.push_back(t.attentive);
      }
    }
    offset += static_cast<int>(s.tokens.size());
  }

  auto stack = [](const std::vector<Matrix>& parts) {
    Matrix out(std::accumulate(parts.begin(), parts.end(), Eigen::Index{0},
                               [](Eigen::Index n, const Matrix& m) { return n + m.rows(); }),
               parts.front().cols());
    Eigen::Index r = 0;
    for (const auto& m : parts) {
      out.middleRows(r, m.rows()) = m;
      r += m.rows();
    }
    return out;
  };

  const ag::Var probs = ag::concat_rows(probs_parts);
  BatchLoss out;
  const ag::Var l_cls = classification_loss(probs, labels);
  out.cls = l_cls.item();
  if (!distil) {
    out.total = l_cls;
    return out;
  }
  ag::Var l_afd = ag::scalar(0.0);
  ag::Var l_spd = ag::scalar(0.0);
  if (ctx.afd) {
    std::vector<int> all(static_cast<std::size_t>(offset));
    std::iota(all.begin(), all.end(), 0);
    l_afd = afd_loss(ag::concat_rows(attentive_parts), ag::constant(stack(teacher_attentive)), all);
  }
  if (ctx.spd) {
    std::vector<int> prev(static_cast<std::size_t>(ctx.n_prev_types));
    std::iota(prev.begin(), prev.end(), 1);
    l_spd = spd_loss(probs, stack(teacher_probs), old_rows, prev);
  }
  out.afd = l_afd.item();
  out.spd = l_spd.item();
  out.total = combined_loss(l_cls, l_afd, l_spd, ctx.n_prev_types, model.labels().size() - 1, ctx.weights);
  return out;
}

std::map<std::string, int> mention_counts(const std::vector<TrainInstance>& train) {
  std::map<std::string, int> out;
  for (const auto& inst : train) {
    for (const auto& ev : inst.visible.events) ++out[ev.event_type];
  }
  return out;
}

std::vector<TokenizedSentence> detect_all(const DetectionModel& model, const std::vector<TokenizedSentence>& sentences) {
  std::vector<TokenizedSentence> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(predict_events(model, s));
  return out;
}

namespace {

struct Streams {
  Rng shuffle;
  Rng dropout;
  Rng noise;

  Streams(std::uint64_t seed, std::string_view phase, int stage)
      : shuffle(derive_seed(seed, std::string(phase) + ":shuffle", static_cast<std::uint64_t>(stage))),
        dropout(derive_seed(seed, std::string(phase) + ":dropout", static_cast<std::uint64_t>(stage))),
        noise(derive_seed(seed, std::string(phase) + ":noise", static_cast<std::uint64_t>(stage))) {}
};

EpochLog train_epoch(DetectionModel& model, nn::Adam& opt, const std::vector<LabeledSentence>& data,
                     const std::vector<TeacherTargets>& teachers, const LossContext& ctx, int batch_size,
                     Streams& streams) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), streams.shuffle);
  EpochLog log;
  int batches = 0;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<const LabeledSentence*> batch;
    std::vector<const TeacherTargets*> targets;
    for (std::size_t k = start; k < end; ++k) {
      batch.push_back(&data[order[k]]);
      if (!teachers.empty()) targets.push_back(&teachers[order[k]]);
    }
    opt.zero_grad();
    const BatchLoss loss = batch_loss(model, batch, targets, ctx, Mode::kTrain, &streams.dropout, &streams.noise);
    ag::backward(loss.total);
    opt.step();
    log.loss += loss.total.item();
    log.cls += loss.cls;
    log.afd += loss.afd;
    log.spd += loss.spd;
    ++batches;
  }
  if (batches > 0) {
    log.loss /= batches;
    log.cls /= batches;
    log.afd /= batches;
    log.spd /= batches;
  }
  return log;
}

double dev_f1(const DetectionModel& model, const std::vector<TokenizedSentence>& dev) {
  const auto types = model.labels().types();
  const std::set<std::string> seen(types.begin(), types.end());
  return detection_f1(detect_all(model, dev), dev, &seen).f1;
}

// Main epochs with best-on-dev parameter selection.
void run_main(DetectionModel& model, nn::Adam& opt, const std::vector<LabeledSentence>& data,
              const std::vector<TeacherTargets>& teachers, const LossContext& ctx,
              const std::vector<TokenizedSentence>& dev, const TrainOptions& options, int stage, StageLog& log) {
  Streams streams(options.seed, "main", stage);
  const bool select = options.select_on_dev && !dev.empty();
  std::vector<Matrix> best;
  double best_f1 = -1.0;
  for (int e = 1; e <= options.epochs; ++e) {
    EpochLog ep = train_epoch(model, opt, data, teachers, ctx, options.batch_size, streams);
    ep.stage = stage;
    ep.phase = "main";
    ep.epoch = e;
    if (select) {
      ep.dev_f1 = dev_f1(model, dev);
      if (*ep.dev_f1 > best_f1) {
        best_f1 = *ep.dev_f1;
        best = model.parameter_values();
        log.best_epoch = e;
      }
    }
    spdlog::debug("stage {} epoch {} loss {:.4f} cls {:.4f} afd {:.4f} spd {:.4f}", stage, e, ep.loss, ep.cls, ep.afd,
                  ep.spd);
    log.curve.push_back(ep);
  }
  if (select && !best.empty()) {
    model.set_parameter_values(best);
  } else {
    log.best_epoch = options.epochs;
  }
}

Vector mean_rows(const Matrix& features, const Span& span) {
  return features.middleRows(span.start, span.end - span.start + 1).colwise().mean().transpose();
}

PrototypeStore build_prototypes(const DetectionModel& model, const std::vector<TrainInstance>& train,
                                const std::set<std::string>& new_types, const MemoryStore& memory) {
  std::map<std::string, std::vector<Vector>> rows;
  for (const auto& inst : train) {
    bool needed = false;
    for (const auto& ev : inst.visible.events) needed = needed || new_types.count(ev.event_type);
    if (!needed) continue;
    const Matrix f = token_features(model, inst.visible.tokens);
    for (const auto& ev : inst.visible.events) {
      if (!new_types.count(ev.event_type)) continue;
      for (int t = ev.trigger.start; t <= ev.trigger.end; ++t) rows[ev.event_type].push_back(f.row(t).transpose());
    }
  }
  for (const Exemplar* ex : memory.all()) {
    if (new_types.count(ex->event_type)) continue;
    const Matrix f = token_features(model, ex->sentence.tokens);
    for (int t = ex->trigger.start; t <= ex->trigger.end; ++t) rows[ex->event_type].push_back(f.row(t).transpose());
  }
  PrototypeStore store;
  for (const auto& [type, vs] : rows) {
    Matrix m(static_cast<Eigen::Index>(vs.size()), vs.front().size());
    for (std::size_t i = 0; i < vs.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = vs[i].transpose();
    store.put(compute_prototype(type, m));
  }
  return store;
}

std::vector<std::string> unseen_types(const DetectionModel& model, const std::vector<std::string>& types) {
  std::vector<std::string> out;
  for (const auto& t : types) {
    if (!model.labels().contains(t)) out.push_back(t);
  }
  return out;
}

}  // namespace

std::map<std::string, std::vector<Exemplar>> select_stage_exemplars(const DetectionModel& model,
                                                                    const std::vector<TrainInstance>& train,
                                                                    const std::vector<LabeledSentence>& labeled,
                                                                    const std::vector<std::string>& types, int m,
                                                                    std::uint64_t seed, int stage) {
  if (labeled.size() != train.size()) throw std::invalid_argument("select_stage_exemplars: views not aligned");
  std::map<std::string, std::vector<Exemplar>> out;
  if (m <= 0) return out;
  const std::set<std::string> wanted(types.begin(), types.end());
  std::map<std::string, std::vector<std::pair<std::size_t, Span>>> candidates;
  std::map<std::string, std::vector<Vector>> feats;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto& visible = train[i].visible;
    std::optional<Matrix> f;
    for (const auto& ev : visible.events) {
      if (!wanted.count(ev.event_type)) continue;
      if (!f) f = token_features(model, visible.tokens);
      candidates[ev.event_type].emplace_back(i, ev.trigger);
      feats[ev.event_type].push_back(mean_rows(*f, ev.trigger));
    }
  }
  for (const auto& type : types) {
    auto it = candidates.find(type);
    if (it == candidates.end()) {
      spdlog::warn("no training mention of {} to store in memory", type);
      continue;
    }
    const auto& vs = feats[type];
    Matrix m_feats(static_cast<Eigen::Index>(vs.size()), vs.front().size());
    for (std::size_t k = 0; k < vs.size(); ++k) m_feats.row(static_cast<Eigen::Index>(k)) = vs[k].transpose();
    auto& chosen = out[type];
    for (std::size_t k : select_exemplar_indices(m_feats, m, derive_seed(seed, "exemplars:" + type,
                                                                          static_cast<std::uint64_t>(stage)))) {
      const auto& [idx, span] = it->second[k];
      chosen.push_back({train[idx].visible.id, span, type, stage, labeled[idx]});
    }
  }
  return out;
}

std::vector<PseudoLabelRecord> relabel_memory(MemoryStore& memory, const DetectionModel& model, double tau, int stage) {
  std::vector<PseudoLabelRecord> out;
  for (Exemplar* ex : memory.all_mutable()) {
    auto& s = ex->sentence;
    for (int t : apply_pseudo_labels(s, classify_tokens(model, s.tokens), model.labels(), tau)) {
      const auto& l = s.labels[static_cast<std::size_t>(t)];
      out.push_back({s.id, t, s.tokens[static_cast<std::size_t>(t)], l.type, l.confidence, "memory", stage});
    }
  }
  return out;
}

StageLog train_task(DetectionModel& model, const ModelSnapshot* teacher, const TaskData& task,
                    const std::vector<TokenizedSentence>& dev, ContinualState& state, const TrainOptions& options,
                    int stage) {
  StageLog log;
  log.stage = stage;
  const auto new_types = unseen_types(model, task.types);
  const int n_prev = model.labels().size() - 1;
  Rng widen_rng(derive_seed(options.seed, "widen", static_cast<std::uint64_t>(stage)));
  model.widen(new_types, widen_rng);

  const auto counts = mention_counts(task.train);
  for (const auto& t : task.types) {
    auto it = counts.find(t);
    state.type_counts[t] = it == counts.end() ? 0 : it->second;
  }

  std::vector<LabeledSentence> gold;
  gold.reserve(task.train.size());
  for (const auto& inst : task.train) gold.push_back(label_tokens(inst.visible));

  std::vector<LabeledSentence> augmented =
      (teacher && options.pseudo_labels)
          ? augment_with_pseudo_labels(gold, *teacher, options.pseudo, &log.pseudo_labels, stage)
          : gold;
  if (!log.pseudo_labels.empty()) spdlog::info("stage {}: {} pseudo labels on training data", stage, log.pseudo_labels.size());

  nn::Adam opt(nn::vars_of(model.parameters()), options.adam);
  LossContext ctx;
  ctx.new_types = {task.types.begin(), task.types.end()};
  ctx.n_prev_types = n_prev;
  ctx.weights = options.weights;
  ctx.afd = teacher && options.afd;
  ctx.spd = teacher && options.spd;
  ctx.attention_layers = options.attention_layers;

  std::map<std::string, Vector> associated;
  if (teacher && options.prototypes) {
    LossContext warm;
    warm.new_types = ctx.new_types;
    Streams streams(options.seed, "warmup", stage);
    for (int e = 1; e <= options.warmup_epochs; ++e) {
      EpochLog ep = train_epoch(model, opt, gold, {}, warm, options.batch_size, streams);
      ep.stage = stage;
      ep.phase = "warmup";
      ep.epoch = e;
      log.curve.push_back(ep);
    }
    log.prototypes = build_prototypes(model, task.train, ctx.new_types, state.memory);
    associated = associated_stds(log.prototypes);
    std::map<std::string, int> seen_counts;
    for (const auto& t : model.labels().types()) seen_counts[t] = state.type_counts.at(t);
    for (const auto& t : long_tail_types(seen_counts, options.long_tail_fraction)) {
      if (log.prototypes.contains(t)) log.long_tail.insert(t);
    }
    ctx.long_tail = &log.long_tail;
    ctx.associated = &associated;
  }

  std::vector<LabeledSentence> data = augmented;
  std::set<std::string> replayed;
  for (const Exemplar* ex : state.memory.all()) {
    if (replayed.insert(ex->sentence.id).second) data.push_back(ex->sentence);
  }
  std::vector<TeacherTargets> targets;
  if (ctx.afd || ctx.spd) {
    targets.reserve(data.size());
    for (const auto& s : data) targets.push_back(teacher_targets(teacher->model(), s.tokens, options.attention_layers));
  }
  run_main(model, opt, data, targets, ctx, dev, options, stage, log);

  state.memory.update(
      select_stage_exemplars(model, task.train, augmented, new_types, options.memory_size, options.seed, stage));
  if (options.pseudo_labels && state.memory.total() > 0) {
    auto records = relabel_memory(state.memory, model, options.pseudo.tau, stage);
    log.pseudo_labels.insert(log.pseudo_labels.end(), records.begin(), records.end());
  }
  return log;
}

std::vector<TokenizedSentence> joint_training_view(const TaskStream& stream, int stage) {
  const auto seen = stream.seen_types(stage);
  const std::set<std::string> seen_set(seen.begin(), seen.end());
  std::vector<TokenizedSentence> out;
  std::set<std::string> ids;
  for (int t = 0; t < stage; ++t) {
    for (const auto& inst : stream.tasks[static_cast<std::size_t>(t)].train) {
      if (!ids.insert(inst.visible.id).second) continue;
      TokenizedSentence full = inst.visible;
      full.events.insert(full.events.end(), inst.masked.begin(), inst.masked.end());
      out.push_back(restrict_to_types(full, seen_set));
    }
  }
  return out;
}

StageLog train_joint(DetectionModel& model, const TaskStream& stream, int stage, const TrainOptions& options,
                     std::map<std::string, int>& type_counts) {
  StageLog log;
  log.stage = stage;
  const auto seen = stream.seen_types(stage);
  Rng widen_rng(derive_seed(options.seed, "widen", static_cast<std::uint64_t>(stage)));
  model.widen(unseen_types(model, seen), widen_rng);

  std::vector<LabeledSentence> data;
  type_counts.clear();
  for (const auto& s : joint_training_view(stream, stage)) {
    for (const auto& ev : s.events) ++type_counts[ev.event_type];
    data.push_back(label_tokens(s));
  }
  nn::Adam opt(nn::vars_of(model.parameters()), options.adam);
  LossContext ctx;
  ctx.new_types = {seen.begin(), seen.end()};
  run_main(model, opt, data, {}, ctx, accumulated_dev(stream, stage), options, stage, log);
  return log;
}

}  // namespace scr
