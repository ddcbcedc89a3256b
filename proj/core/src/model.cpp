#include "ita/model.hpp"

#include <string>

#include "ita/errors.hpp"

namespace ita {
namespace {

struct ViewForward {
  EncoderTrace trace;
  Matrix em;
  ChainTables tables;
};

ViewForward run_view(const EncoderConfig& cfg, const ParameterSet& params,
                     const std::vector<std::size_t>& ids, std::size_t sentence_len,
                     const CrfParams& crf) {
  ViewForward vf;
  vf.trace = encode_trace(cfg, params, ids);
  vf.em = emissions(params, vf.trace.output, sentence_len);
  vf.tables = chain_tables(vf.em, crf);
  return vf;
}

void add_crf_grads(const CrfGradients& g, ParameterSet& grads) {
  grads.at("crf.transitions").add_inplace(g.d_transitions);
  grads.at("crf.start").add_inplace(g.d_start);
  grads.at("crf.end").add_inplace(g.d_end);
}

void backprop_view(const EncoderConfig& cfg, const ParameterSet& params,
                   const ViewForward& vf, const Matrix& d_emissions, ParameterSet& grads) {
  Matrix d_hidden(vf.trace.output.rows(), vf.trace.output.cols());
  emissions_backward(params, vf.trace.output, d_emissions.rows(), d_emissions, d_hidden, grads);
  encoder_backward(cfg, params, vf.trace, d_hidden, grads);
}

}  // namespace

SentenceViews build_views(const LabeledSentence& sentence, const ContextStore& contexts,
                          const AlignmentConfig& align, const Vocabulary& vocab) {
  SentenceViews out;
  out.sentence_len = sentence.size();
  out.text_ids.reserve(sentence.size());
  for (const auto& tok : sentence.tokens) out.text_ids.push_back(vocab.token_id(tok));
  out.gold.reserve(sentence.labels.size());
  for (const auto& lab : sentence.labels) out.gold.push_back(vocab.label_id(lab));

  std::vector<std::string> context;
  if (sentence.image_id) {
    if (const VisualContextRecord* rec = contexts.find(*sentence.image_id))
      context = linearize_all(*rec, align);
  }
  if (!context.empty())
    context.insert(context.begin(), std::string(Vocabulary::kSepToken));

  CrossModalInput input = build_cross_modal_input(sentence, context, align);
  out.cross_ids.reserve(input.tokens.size());
  for (const auto& tok : input.tokens) out.cross_ids.push_back(vocab.token_id(tok));
  out.has_context = input.tokens.size() > sentence.size();
  return out;
}

CrfParams crf_from_params(const ParameterSet& params) {
  CrfParams crf;
  crf.transitions = params.at("crf.transitions");
  crf.start = params.at("crf.start");
  crf.end = params.at("crf.end");
  return crf;
}

Matrix teacher_marginals(const EncoderConfig& cfg, const ParameterSet& params,
                         const SentenceViews& views) {
  const CrfParams crf = crf_from_params(params);
  Matrix hidden = encode(cfg, params, views.cross_ids);
  Matrix em = emissions(params, hidden, views.sentence_len);
  return marginals_from_tables(chain_tables(em, crf));
}

SentenceLoss sentence_loss(const EncoderConfig& cfg, const ParameterSet& params,
                           const SentenceViews& views, const LossConfig& loss_cfg,
                           const Matrix* frozen_teacher) {
  SentenceLoss out;
  const CrfParams crf = crf_from_params(params);
  const std::size_t n = views.sentence_len;

  Matrix em_text;
  ChainTables tab_text;
  if (loss_cfg.train_text || loss_cfg.use_cva) {
    Matrix hidden = encode(cfg, params, views.text_ids);
    em_text = emissions(params, hidden, n);
    tab_text = chain_tables(em_text, crf);
  }
  if (loss_cfg.train_text) {
    out.text_nll = tab_text.log_z - score_sequence(em_text, crf, views.gold);
    out.total += out.text_nll;
  }

  Matrix em_cross;
  ChainTables tab_cross;
  const bool need_cross = loss_cfg.train_cross || (loss_cfg.use_cva && !frozen_teacher);
  if (need_cross) {
    Matrix hidden = encode(cfg, params, views.cross_ids);
    em_cross = emissions(params, hidden, n);
    tab_cross = chain_tables(em_cross, crf);
  }
  if (loss_cfg.train_cross) {
    out.cross_nll = tab_cross.log_z - score_sequence(em_cross, crf, views.gold);
    out.total += out.cross_nll;
  }
  if (loss_cfg.use_cva) {
    const Matrix teacher =
        frozen_teacher ? *frozen_teacher : marginals_from_tables(tab_cross);
    const CvaResult r = cva_loss(teacher, marginals_from_tables(tab_text));
    out.cva_cross_entropy = r.cross_entropy;
    out.cva_kl = r.kl;
    out.total += r.cross_entropy;
  }
  return out;
}

SentenceLoss sentence_loss_and_grad(const EncoderConfig& cfg, const ParameterSet& params,
                                    const SentenceViews& views, const LossConfig& loss_cfg,
                                    ParameterSet& grads) {
  SentenceLoss out;
  const CrfParams crf = crf_from_params(params);
  const std::size_t n = views.sentence_len;
  const std::size_t labels = crf.label_count();

  // Cross-modal view first: its marginals are the CVA teacher.
  ViewForward cross;
  Matrix teacher;
  const bool need_cross = loss_cfg.train_cross || loss_cfg.use_cva;
  if (need_cross) {
    cross = run_view(cfg, params, views.cross_ids, n, crf);
    if (loss_cfg.use_cva) teacher = marginals_from_tables(cross.tables);
  }
  if (loss_cfg.train_cross) {
    out.cross_nll = cross.tables.log_z - score_sequence(cross.em, crf, views.gold);
    out.total += out.cross_nll;
    const CrfGradients g = nll_backward(cross.em, crf, views.gold, cross.tables);
    add_crf_grads(g, grads);
    backprop_view(cfg, params, cross, g.d_emissions, grads);
  }

  // Text view: NLL plus the consistency term against the constant teacher.
  if (loss_cfg.train_text || loss_cfg.use_cva) {
    const ViewForward text = run_view(cfg, params, views.text_ids, n, crf);
    Matrix d_em(n, labels);
    if (loss_cfg.train_text) {
      out.text_nll = text.tables.log_z - score_sequence(text.em, crf, views.gold);
      out.total += out.text_nll;
      const CrfGradients g = nll_backward(text.em, crf, views.gold, text.tables);
      add_crf_grads(g, grads);
      d_em.add_inplace(g.d_emissions);
    }
    if (loss_cfg.use_cva) {
      const CvaResult r = cva_loss(teacher, marginals_from_tables(text.tables));
      out.cva_cross_entropy = r.cross_entropy;
      out.cva_kl = r.kl;
      out.total += r.cross_entropy;
      const CrfGradients g = cva_backward(teacher, text.em, crf, text.tables);
      add_crf_grads(g, grads);
      d_em.add_inplace(g.d_emissions);
    }
    backprop_view(cfg, params, text, d_em, grads);
  }
  return out;
}

std::vector<std::size_t> decode(const EncoderConfig& cfg, const ParameterSet& params,
                                const std::vector<std::size_t>& ids, std::size_t sentence_len) {
  Matrix hidden = encode(cfg, params, ids);
  Matrix em = emissions(params, hidden, sentence_len);
  return viterbi(em, crf_from_params(params)).labels;
}

}  // namespace ita
