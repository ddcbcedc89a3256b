#include "ita/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <numeric>
#include <ostream>
#include <thread>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "ita/crf.hpp"
#include "ita/errors.hpp"
#include "ita/rng.hpp"

namespace ita {
namespace {

std::size_t resolve_threads(std::size_t batch_size) {
  std::size_t n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* env = std::getenv("ITA_THREADS")) {
    char* end = nullptr;
    const unsigned long parsed = std::strtoul(env, &end, 10);
    if (end && *end == '\0' && parsed > 0) n = static_cast<std::size_t>(parsed);
  }
  return std::max<std::size_t>(1, std::min(n, batch_size));
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

AdamWConfig TrainConfig::optimizer() const {
  AdamWConfig o;
  o.lr_encoder = lr_encoder;
  o.lr_crf = lr_crf;
  o.beta1 = beta1;
  o.beta2 = beta2;
  o.epsilon = epsilon;
  o.weight_decay = weight_decay;
  o.clip_norm = clip_norm;
  return o;
}

LossConfig TrainConfig::loss_at_epoch(std::size_t epoch) const {
  LossConfig lc;
  lc.train_text = train_text;
  lc.train_cross = train_cross;
  lc.use_cva = use_cva && epoch >= cva_warmup_epochs;
  return lc;
}

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.lr_encoder <= 0.0 || cfg.lr_crf <= 0.0)
    throw ConfigError("learning rates must be positive");
  if (cfg.weight_decay < 0.0) throw ConfigError("weight_decay must be nonnegative");
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0)
    throw ConfigError("moment coefficients must lie in [0, 1)");
  if (cfg.epsilon <= 0.0) throw ConfigError("optimizer epsilon must be positive");
  if (cfg.seeds.empty()) throw ConfigError("at least one seed is required");
  if (!cfg.train_text && !cfg.train_cross && !cfg.use_cva)
    throw ConfigError("the objective is empty: enable at least one loss term");
  if (cfg.vocab_min_count < 1) throw ConfigError("vocab_min_count must be >= 1");
}

StepWorkspace make_workspace(const ParameterSet& params, std::size_t batch_size) {
  StepWorkspace ws;
  ws.slots.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) ws.slots.push_back(params.zeros_like());
  ws.losses.resize(batch_size);
  ws.grads = params.zeros_like();
  return ws;
}

StepStats train_step(const EncoderConfig& cfg, const std::vector<BatchItem>& batch,
                     const LossConfig& loss_cfg, ParameterSet& params, AdamW& opt,
                     StepWorkspace& ws, std::size_t threads) {
  const std::size_t count = batch.size();
  if (count == 0) throw DataError("empty batch");
  if (count > ws.slots.size()) throw DataError("batch larger than the workspace");

  auto run_one = [&](std::size_t i) {
    ws.slots[i].set_zero();
    ws.losses[i] = sentence_loss_and_grad(cfg, params, *batch[i].views, loss_cfg, ws.slots[i]);
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) run_one(i);
  } else {
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        for (std::size_t i = w; i < count; i += workers) {
          try {
            run_one(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (std::thread& t : pool) t.join();
    for (std::size_t i = 0; i < count; ++i)
      if (errors[i]) std::rethrow_exception(errors[i]);
  }

  StepStats stats;
  ws.grads.set_zero();
  for (std::size_t i = 0; i < count; ++i) {
    const SentenceLoss& l = ws.losses[i];
    if (!std::isfinite(l.total))
      throw NumericError("non-finite loss at training sentence " +
                         std::to_string(batch[i].corpus_index));
    stats.mean.text_nll += l.text_nll;
    stats.mean.cross_nll += l.cross_nll;
    stats.mean.cva_cross_entropy += l.cva_cross_entropy;
    stats.mean.cva_kl += l.cva_kl;
    stats.mean.total += l.total;
    ws.grads.add_scaled(ws.slots[i], 1.0);
  }
  const double inv = 1.0 / static_cast<double>(count);
  stats.mean.text_nll *= inv;
  stats.mean.cross_nll *= inv;
  stats.mean.cva_cross_entropy *= inv;
  stats.mean.cva_kl *= inv;
  stats.mean.total *= inv;
  ws.grads.scale(inv);
  if (!ws.grads.all_finite())
    throw NumericError("non-finite gradient in a batch starting at training sentence " +
                       std::to_string(batch.front().corpus_index));
  stats.grad_norm = opt.step(params, ws.grads);
  return stats;
}

namespace {

std::vector<SentenceViews> build_all_views(const std::vector<LabeledSentence>& sentences,
                                           const ContextStore& contexts,
                                           const AlignmentConfig& align,
                                           const Vocabulary& vocab) {
  std::vector<SentenceViews> views;
  views.reserve(sentences.size());
  for (const LabeledSentence& s : sentences) views.push_back(build_views(s, contexts, align, vocab));
  return views;
}

void log_line(std::ostream* log, const nlohmann::ordered_json& j) {
  if (log) *log << j.dump() << '\n';
}

}  // namespace

TrainOutcome train(const std::vector<LabeledSentence>& train_set,
                   const std::vector<LabeledSentence>& dev_set,
                   const std::vector<LabeledSentence>& test_set, const ContextStore& contexts,
                   const AlignmentConfig& align, EncoderConfig dims, const TrainConfig& cfg,
                   std::ostream* log) {
  validate_train_config(cfg);
  if (train_set.empty()) throw DataError("training set is empty");

  AlignmentConfig align_used = align;
  align_used.modes = cfg.modes;

  // Vocabulary from the training split: sentence tokens plus every token the
  // selected context modes can produce. Random pairing permutes ids within
  // the same multiset, so the streams (and thus the vocabulary) are the same.
  std::vector<std::vector<std::string>> streams;
  for (const LabeledSentence& s : train_set) {
    if (!s.image_id) continue;
    if (const VisualContextRecord* rec = contexts.find(*s.image_id))
      streams.push_back(linearize_all(*rec, align_used));
  }
  const Vocabulary vocab = build_vocab(train_set, streams, cfg.vocab_min_count);
  dims.vocab_size = vocab.token_count();
  dims.label_count = vocab.label_count();
  validate_config(dims);

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed_ms = [&t0]() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                 t0)
        .count();
  };

  TrainOutcome outcome;
  std::vector<double> f1_text, f1_cross, rep_dist;

  for (const std::uint64_t seed : cfg.seeds) {
    std::vector<LabeledSentence> train_used = train_set;
    if (cfg.random_pairing) train_used = shuffle_pairing(std::move(train_used), seed);
    const std::vector<SentenceViews> views =
        build_all_views(train_used, contexts, align_used, vocab);

    ParameterSet params;
    register_parameters(dims, params);
    const Rng seed_rng(seed);
    Rng init_rng = seed_rng.fork("init");
    init_parameters(dims, params, init_rng);

    AdamW opt(params, cfg.optimizer());
    StepWorkspace ws = make_workspace(params, cfg.batch_size);
    const std::size_t threads = resolve_threads(cfg.batch_size);

    std::vector<std::size_t> order(views.size());
    std::iota(order.begin(), order.end(), 0);

    SeedResult result;
    result.seed = seed;
    double best_f1 = -1.0;
    ParameterSet best_params = params;
    const bool select_on_cross = cfg.train_cross || cfg.use_cva;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      Rng shuffle_rng = seed_rng.fork("shuffle.epoch." + std::to_string(epoch));
      shuffle_rng.shuffle(order);
      const LossConfig lc = cfg.loss_at_epoch(epoch);

      EpochStats es;
      es.epoch = epoch;
      std::size_t step = 0;
      for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
        const std::size_t end = std::min(begin + cfg.batch_size, order.size());
        std::vector<BatchItem> batch;
        batch.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i)
          batch.push_back(BatchItem{&views[order[i]], order[i]});
        const StepStats st = train_step(dims, batch, lc, params, opt, ws, threads);
        const double w = static_cast<double>(batch.size());
        es.text_nll += st.mean.text_nll * w;
        es.cross_nll += st.mean.cross_nll * w;
        es.cva_cross_entropy += st.mean.cva_cross_entropy * w;
        es.cva_kl += st.mean.cva_kl * w;
        log_line(log, nlohmann::ordered_json{{"type", "step"},
                                             {"seed", seed},
                                             {"epoch", epoch},
                                             {"step", step},
                                             {"loss_text", st.mean.text_nll},
                                             {"loss_cross", st.mean.cross_nll},
                                             {"loss_cva", st.mean.cva_cross_entropy},
                                             {"kl", st.mean.cva_kl},
                                             {"loss_total", st.mean.total},
                                             {"grad_norm", st.grad_norm},
                                             {"wall_ms", elapsed_ms()}});
        ++step;
      }
      const double inv_n = 1.0 / static_cast<double>(views.size());
      es.text_nll *= inv_n;
      es.cross_nll *= inv_n;
      es.cva_cross_entropy *= inv_n;
      es.cva_kl *= inv_n;

      double selection_f1 = 0.0;
      if (!dev_set.empty()) {
        const DualViewReport dev = dual_view_eval(dims, params, dev_set, contexts, align_used, vocab);
        es.dev_f1_text = dev.text.f1;
        es.dev_f1_cross = dev.cross.f1;
        es.dev_representation_distance = dev.mean_representation_distance;
        selection_f1 = select_on_cross ? dev.cross.f1 : dev.text.f1;
      }
      const bool improved =
          dev_set.empty() ? epoch + 1 == cfg.epochs : selection_f1 > best_f1;
      if (improved) {
        best_f1 = selection_f1;
        best_params = params;
        result.best_epoch = epoch;
      }
      log_line(log, nlohmann::ordered_json{{"type", "epoch"},
                                           {"seed", seed},
                                           {"epoch", epoch},
                                           {"loss_text", es.text_nll},
                                           {"loss_cross", es.cross_nll},
                                           {"loss_cva", es.cva_cross_entropy},
                                           {"kl", es.cva_kl},
                                           {"dev_f1_text", es.dev_f1_text},
                                           {"dev_f1_cross", es.dev_f1_cross},
                                           {"dev_rep_distance", es.dev_representation_distance},
                                           {"wall_ms", elapsed_ms()}});
      result.epochs.push_back(es);
    }

    result.test = dual_view_eval(dims, best_params, test_set, contexts, align_used, vocab);
    f1_text.push_back(result.test.text.f1);
    f1_cross.push_back(result.test.cross.f1);
    rep_dist.push_back(result.test.mean_representation_distance);
    log_line(log, nlohmann::ordered_json{{"type", "seed"},
                                         {"seed", seed},
                                         {"best_epoch", result.best_epoch},
                                         {"test_f1_text", result.test.text.f1},
                                         {"test_f1_cross", result.test.cross.f1},
                                         {"test_rep_distance", result.test.mean_representation_distance},
                                         {"wall_ms", elapsed_ms()}});
    outcome.report.seeds.push_back(std::move(result));

    Checkpoint ckpt;
    ckpt.encoder = dims;
    ckpt.alignment = align_used;
    ckpt.vocab = vocab;
    ckpt.params = std::move(best_params);
    outcome.checkpoints.push_back(std::move(ckpt));
  }

  outcome.report.mean_test_f1_text = mean_of(f1_text);
  outcome.report.std_test_f1_text = std_of(f1_text);
  outcome.report.mean_test_f1_cross = mean_of(f1_cross);
  outcome.report.std_test_f1_cross = std_of(f1_cross);
  outcome.report.mean_test_representation_distance = mean_of(rep_dist);
  return outcome;
}

AuditReport finite_difference_audit(const EncoderConfig& cfg, const ParameterSet& params,
                                    const SentenceViews& views, const LossConfig& loss_cfg,
                                    double step_h, std::size_t coords_per_tensor,
                                    std::uint64_t sample_seed) {
  AuditReport report;

  ParameterSet analytic = params.zeros_like();
  sentence_loss_and_grad(cfg, params, views, loss_cfg, analytic);

  Matrix teacher;
  const Matrix* frozen = nullptr;
  if (loss_cfg.use_cva) {
    teacher = teacher_marginals(cfg, params, views);
    frozen = &teacher;
  }

  ParameterSet work = params;  // mutate one coordinate at a time, then restore
  const Rng audit_rng(sample_seed);
  for (std::size_t t = 0; t < work.count(); ++t) {
    NamedTensor& tensor = work.item(t);
    const std::size_t size = tensor.value.size();
    std::vector<std::size_t> coords(size);
    std::iota(coords.begin(), coords.end(), 0);
    if (size > coords_per_tensor) {
      Rng pick = audit_rng.fork(tensor.name);
      pick.shuffle(coords);
      coords.resize(coords_per_tensor);
    }

    AuditTensor entry;
    entry.tensor = tensor.name;
    entry.coords_checked = coords.size();
    for (const std::size_t j : coords) {
      double& slot = tensor.value.values()[j];
      const double original = slot;
      slot = original + step_h;
      const double f_plus = sentence_loss(cfg, work, views, loss_cfg, frozen).total;
      slot = original - step_h;
      const double f_minus = sentence_loss(cfg, work, views, loss_cfg, frozen).total;
      slot = original;
      const double fd = (f_plus - f_minus) / (2.0 * step_h);
      const double g = analytic.item(t).value.values()[j];
      const double rel = std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-6});
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.tensors.push_back(std::move(entry));
  }

  // Stop-gradient contract: a CVA-only objective reaches the parameters
  // through the student (text) view alone, so coordinates used only by the
  // cross-modal view must receive exactly zero gradient.
  if (loss_cfg.use_cva && views.cross_ids.size() > views.text_ids.size()) {
    ParameterSet cva_only = params.zeros_like();
    sentence_loss_and_grad(cfg, params, views, LossConfig{false, false, true}, cva_only);

    const Matrix& d_pos = cva_only.at("embed.pos");
    for (std::size_t i = views.text_ids.size(); i < views.cross_ids.size(); ++i)
      for (std::size_t j = 0; j < d_pos.cols(); ++j) {
        ++report.teacher_coords_checked;
        if (d_pos(i, j) != 0.0) report.teacher_path_zero = false;
      }

    const std::unordered_set<std::size_t> text_ids(views.text_ids.begin(), views.text_ids.end());
    const Matrix& d_tok = cva_only.at("embed.token");
    for (const std::size_t id : views.cross_ids) {
      if (text_ids.count(id)) continue;
      for (std::size_t j = 0; j < d_tok.cols(); ++j) {
        ++report.teacher_coords_checked;
        if (d_tok(id, j) != 0.0) report.teacher_path_zero = false;
      }
    }
  }
  return report;
}

}  // namespace ita
