#pragma once

#include <cstddef>
#include <vector>

#include "ita/alignment.hpp"
#include "ita/corpus.hpp"
#include "ita/crf.hpp"
#include "ita/encoder.hpp"
#include "ita/params.hpp"

namespace ita {

// Both encoder inputs for one sentence: the text-only view and the
// cross-modal view (sentence ++ [X] ++ linearized context). When no context
// record is available the two views are identical.
struct SentenceViews {
  std::vector<std::size_t> text_ids;
  std::vector<std::size_t> cross_ids;
  std::vector<std::size_t> gold;  // label ids, aligned with the sentence
  std::size_t sentence_len = 0;
  bool has_context = false;
};

SentenceViews build_views(const LabeledSentence& sentence, const ContextStore& contexts,
                          const AlignmentConfig& align, const Vocabulary& vocab);

// Which terms contribute to the training objective.
struct LossConfig {
  bool train_text = true;   // NLL of the text-only view
  bool train_cross = true;  // NLL of the cross-modal view
  bool use_cva = true;      // consistency term distilling cross into text
};

// Scalar decomposition of one sentence's objective.
struct SentenceLoss {
  double text_nll = 0.0;
  double cross_nll = 0.0;
  double cva_cross_entropy = 0.0;
  double cva_kl = 0.0;  // diagnostic, not part of the objective
  double total = 0.0;   // sum of the enabled terms
};

// The three CRF tables, copied out of the shared parameter set.
CrfParams crf_from_params(const ParameterSet& params);

// Posterior marginals of the cross-modal view; this is the (detached) CVA
// teacher distribution.
Matrix teacher_marginals(const EncoderConfig& cfg, const ParameterSet& params,
                         const SentenceViews& views);

// Objective value without gradients. When frozen_teacher is non-null the CVA
// term uses it instead of recomputing the cross-view marginals; that matches
// the stop-gradient semantics and is what a finite-difference check of the
// training gradient must evaluate.
SentenceLoss sentence_loss(const EncoderConfig& cfg, const ParameterSet& params,
                           const SentenceViews& views, const LossConfig& loss_cfg,
                           const Matrix* frozen_teacher = nullptr);

// Runs the enabled forward passes and accumulates one sentence's gradients
// into grads. The CVA teacher is a constant: no gradient flows through the
// cross-modal view because of the consistency term.
SentenceLoss sentence_loss_and_grad(const EncoderConfig& cfg, const ParameterSet& params,
                                    const SentenceViews& views, const LossConfig& loss_cfg,
                                    ParameterSet& grads);

// Viterbi decode of one view (ids may include context; only the first
// sentence_len positions carry labels).
std::vector<std::size_t> decode(const EncoderConfig& cfg, const ParameterSet& params,
                                const std::vector<std::size_t>& ids, std::size_t sentence_len);

}  // namespace ita
