#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ita/alignment.hpp"
#include "ita/checkpoint.hpp"
#include "ita/corpus.hpp"
#include "ita/encoder.hpp"
#include "ita/evaluation.hpp"
#include "ita/model.hpp"
#include "ita/optimizer.hpp"
#include "ita/params.hpp"

namespace ita {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double lr_encoder = 1e-3;
  double lr_crf = 1e-2;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  // Objective switches: the baseline trains the text view only; the
  // single-view variants train the cross-modal view only; the joint and
  // consistency variants enable several terms at once.
  bool train_text = true;
  bool train_cross = true;
  bool use_cva = true;
  std::size_t cva_warmup_epochs = 0;  // consistency term joins after this many epochs
  bool random_pairing = false;        // permute training image ids (corruption ablation)
  ModeSet modes;
  std::size_t vocab_min_count = 1;

  AdamWConfig optimizer() const;
  LossConfig loss_at_epoch(std::size_t epoch) const;
};

// Throws ConfigError on out-of-range fields or an empty objective.
void validate_train_config(const TrainConfig& cfg);

struct BatchItem {
  const SentenceViews* views = nullptr;
  std::size_t corpus_index = 0;  // position in the training set, for diagnostics
};

// Reusable per-sentence gradient slots. Reducing slots in sentence order
// makes the update independent of how many workers filled them.
struct StepWorkspace {
  std::vector<ParameterSet> slots;
  std::vector<SentenceLoss> losses;
  ParameterSet grads;
};

StepWorkspace make_workspace(const ParameterSet& params, std::size_t batch_size);

struct StepStats {
  SentenceLoss mean;       // batch-averaged loss components
  double grad_norm = 0.0;  // pre-clip norm of the averaged gradient
};

// One update: per-sentence forward/backward into workspace slots (parallel
// across `threads` workers), in-order reduction, batch averaging, clipping,
// optimizer step. Throws NumericError naming the offending sentence when a
// loss or the reduced gradient is non-finite.
StepStats train_step(const EncoderConfig& cfg, const std::vector<BatchItem>& batch,
                     const LossConfig& loss_cfg, ParameterSet& params, AdamW& opt,
                     StepWorkspace& ws, std::size_t threads);

struct EpochStats {
  std::size_t epoch = 0;
  double text_nll = 0.0;  // per-sentence averages over the epoch
  double cross_nll = 0.0;
  double cva_cross_entropy = 0.0;
  double cva_kl = 0.0;
  double dev_f1_text = 0.0;
  double dev_f1_cross = 0.0;
  double dev_representation_distance = 0.0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::size_t best_epoch = 0;
  std::vector<EpochStats> epochs;
  DualViewReport test;  // evaluation of the best-dev parameters
};

struct TrainReport {
  std::vector<SeedResult> seeds;
  double mean_test_f1_text = 0.0, std_test_f1_text = 0.0;
  double mean_test_f1_cross = 0.0, std_test_f1_cross = 0.0;
  double mean_test_representation_distance = 0.0;
};

struct TrainOutcome {
  std::vector<Checkpoint> checkpoints;  // one per seed, best-dev parameters
  TrainReport report;
};

// Full multi-seed run. dims.vocab_size and dims.label_count are overwritten
// from the training data. Model selection: dev micro-F1 of the cross-modal
// view when that view takes part in the objective, the text view otherwise;
// ties keep the earlier epoch. An empty dev set keeps the final epoch. The
// optional log receives line-delimited JSON (timestamps live only there).
// Worker count: min(ITA_THREADS if set, hardware concurrency, batch size).
TrainOutcome train(const std::vector<LabeledSentence>& train_set,
                   const std::vector<LabeledSentence>& dev_set,
                   const std::vector<LabeledSentence>& test_set, const ContextStore& contexts,
                   const AlignmentConfig& align, EncoderConfig dims, const TrainConfig& cfg,
                   std::ostream* log = nullptr);

struct AuditTensor {
  std::string tensor;
  double max_rel_err = 0.0;
  std::size_t coords_checked = 0;
};

struct AuditReport {
  std::vector<AuditTensor> tensors;
  double max_rel_err = 0.0;
  // The consistency term must not push gradient through its teacher: with a
  // CVA-only objective, coordinates reachable only via the cross-modal view
  // (positions past the sentence, context-only token rows) stay exactly 0.
  bool teacher_path_zero = true;
  std::size_t teacher_coords_checked = 0;

  bool passed(double tolerance) const { return max_rel_err <= tolerance && teacher_path_zero; }
};

// Central differences (f(x+h) - f(x-h)) / 2h against the analytic gradient
// on one sentence, sampling up to coords_per_tensor coordinates per tensor.
// The CVA teacher is frozen at the base parameters during the sweep, which
// is the function the analytic gradient differentiates. Relative error uses
// |fd - g| / max(|fd|, |g|, 1e-6).
AuditReport finite_difference_audit(const EncoderConfig& cfg, const ParameterSet& params,
                                    const SentenceViews& views, const LossConfig& loss_cfg,
                                    double step_h, std::size_t coords_per_tensor,
                                    std::uint64_t sample_seed);

}  // namespace ita
