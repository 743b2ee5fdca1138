#pragma once

// Staged detection training: pseudo-label augmentation, distillation against
// the previous-stage snapshot, prototype-driven long-tail enhancement,
// replay, exemplar selection and memory relabeling.

#include "scr/corpus.hpp"
#include "scr/detection.hpp"
#include "scr/labels.hpp"
#include "scr/losses.hpp"
#include "scr/memory.hpp"
#include "scr/nn.hpp"
#include "scr/prototype.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace scr {

struct TrainOptions {
  int epochs = 8;
  int warmup_epochs = 1;
  int batch_size = 8;
  nn::AdamOptions adam;
  PseudoLabelConfig pseudo;
  DistillationWeights weights;
  int attention_layers = 3;
  int memory_size = 10;
  double long_tail_fraction = 0.8;
  bool pseudo_labels = true;  // DA
  bool afd = true;
  bool spd = true;
  bool prototypes = true;     // PKT
  bool select_on_dev = true;
  std::uint64_t seed = 0;
};

struct EpochLog {
  int stage = 0;
  std::string phase;  // "warmup" or "main"
  int epoch = 0;
  double loss = 0.0;
  double cls = 0.0;
  double afd = 0.0;
  double spd = 0.0;
  std::optional<double> dev_f1;
};

struct StageLog {
  int stage = 0;
  std::vector<EpochLog> curve;
  std::vector<PseudoLabelRecord> pseudo_labels;  // train augmentation and memory relabeling
  PrototypeStore prototypes;
  std::set<std::string> long_tail;
  int best_epoch = 0;
};

void write_curve_csv(const std::vector<EpochLog>& curve, const std::string& path);

/// Teacher outputs for one sentence, computed once in evaluation mode.
struct TeacherTargets {
  Matrix probs;      // n x (|previous seen| + 1)
  Matrix attentive;  // n x h
};

TeacherTargets teacher_targets(const DetectionModel& teacher, const std::vector<std::string>& tokens,
                               int attention_layers);

/// Everything one batch loss needs besides the sentences.
struct LossContext {
  std::set<std::string> new_types;     // E_i
  int n_prev_types = 0;                // |seen before this stage|
  DistillationWeights weights;
  bool afd = false;
  bool spd = false;
  int attention_layers = 3;
  const std::set<std::string>* long_tail = nullptr;               // enhancement disabled when null
  const std::map<std::string, Vector>* associated = nullptr;
};

struct BatchLoss {
  ag::Var total;
  double cls = 0.0;
  double afd = 0.0;
  double spd = 0.0;
};

/// Loss of one batch. `teachers` is either empty or aligned with `batch`.
/// In training mode `dropout_rng` and `noise_rng` must be non-null.
BatchLoss batch_loss(const DetectionModel& model, const std::vector<const LabeledSentence*>& batch,
                     const std::vector<const TeacherTargets*>& teachers, const LossContext& ctx, Mode mode,
                     Rng* dropout_rng, Rng* noise_rng);

/// Per-type gold mention counts of the visible training views.
std::map<std::string, int> mention_counts(const std::vector<TrainInstance>& train);

/// Detection predictions for every sentence.
std::vector<TokenizedSentence> detect_all(const DetectionModel& model, const std::vector<TokenizedSentence>& sentences);

/// Carried across stages of one run.
struct ContinualState {
  MemoryStore memory;
  std::map<std::string, int> type_counts;  // training counts recorded when each type was introduced
};

/// One stage of the continual procedure. `teacher` is null at stage 1 (and
/// always for the fine-tuning baseline). `dev` is scored against the model's
/// seen types for best-epoch selection.
StageLog train_task(DetectionModel& model, const ModelSnapshot* teacher, const TaskData& task,
                    const std::vector<TokenizedSentence>& dev, ContinualState& state, const TrainOptions& options,
                    int stage);

/// Train sentences of tasks 1..stage, deduplicated, with every seen type's
/// gold mentions visible.
std::vector<TokenizedSentence> joint_training_view(const TaskStream& stream, int stage);

/// Fresh-model training on all data of tasks 1..stage with every seen type
/// visible (joint-training baseline).
StageLog train_joint(DetectionModel& model, const TaskStream& stream, int stage, const TrainOptions& options,
                     std::map<std::string, int>& type_counts);

/// Applies the pseudo-label rule to every stored exemplar using `model` as
/// teacher. Returns one record per new label.
std::vector<PseudoLabelRecord> relabel_memory(MemoryStore& memory, const DetectionModel& model, double tau, int stage);

/// k-means exemplar choice for each of `types` among the gold visible
/// mentions of `data`, clustered on mean trigger features.
std::map<std::string, std::vector<Exemplar>> select_stage_exemplars(const DetectionModel& model,
                                                                    const std::vector<TrainInstance>& train,
                                                                    const std::vector<LabeledSentence>& labeled,
                                                                    const std::vector<std::string>& types, int m,
                                                                    std::uint64_t seed, int stage);

}  // namespace scr
