#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ita/checkpoint.hpp"
#include "ita/errors.hpp"
#include "ita/training.hpp"
#include "temp_dir.hpp"

using namespace ita;
using ita::testing::TempDir;

namespace {

struct TrainFixture {
  std::vector<LabeledSentence> train;
  ContextStore contexts;
  AlignmentConfig align;
  EncoderConfig dims;

  TrainFixture() {
    const char* surfaces[] = {"ana", "bo", "cy", "dee", "eli", "fay"};
    for (int i = 0; i < 6; ++i) {
      LabeledSentence s;
      s.tokens = {"we", "saw", surfaces[i]};
      s.labels = {"O", "O", i % 2 == 0 ? "S-PER" : "S-LOC"};
      if (i < 4) {
        const std::string id = "fx" + std::to_string(i);
        s.image_id = id;
        VisualContextRecord rec;
        rec.image_id = id;
        rec.objects = {{i % 2 == 0 ? "person" : "mountain", 0.9, {}}};
        rec.captions = {{"small scene", 0.8}};
        contexts.records.emplace(id, rec);
      }
      train.push_back(std::move(s));
    }
    dims.d_model = 8;
    dims.d_ff = 12;
    dims.layers = 1;
    dims.heads = 2;
    dims.max_positions = 32;
  }
};

std::string checkpoint_bytes(const Checkpoint& ckpt, const TempDir& dir, const std::string& tag) {
  const std::string path = dir.file(tag + ".json");
  save_checkpoint(ckpt, path);
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(validate_train_config(cfg));

  cfg = TrainConfig{};
  cfg.epochs = 0;
  CHECK_THROWS_AS(validate_train_config(cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(validate_train_config(cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.lr_encoder = 0.0;
  CHECK_THROWS_AS(validate_train_config(cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.seeds.clear();
  CHECK_THROWS_AS(validate_train_config(cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.train_text = cfg.train_cross = cfg.use_cva = false;
  CHECK_THROWS_AS(validate_train_config(cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.beta2 = 1.0;
  CHECK_THROWS_AS(validate_train_config(cfg), ConfigError);
}

TEST_CASE("the consistency term joins after the warmup epochs") {
  TrainConfig cfg;
  cfg.cva_warmup_epochs = 2;
  CHECK_FALSE(cfg.loss_at_epoch(0).use_cva);
  CHECK_FALSE(cfg.loss_at_epoch(1).use_cva);
  CHECK(cfg.loss_at_epoch(2).use_cva);
  CHECK(cfg.loss_at_epoch(0).train_text);
  CHECK(cfg.loss_at_epoch(0).train_cross);

  cfg.use_cva = false;
  CHECK_FALSE(cfg.loss_at_epoch(5).use_cva);
}

TEST_CASE("train_step averages per-sentence losses over the batch") {
  const TrainFixture fx;
  std::vector<std::vector<std::string>> streams;
  for (const auto& s : fx.train)
    if (s.image_id) streams.push_back(linearize_all(*fx.contexts.find(*s.image_id), fx.align));
  const Vocabulary vocab = build_vocab(fx.train, streams, 1);

  EncoderConfig cfg = fx.dims;
  cfg.vocab_size = vocab.token_count();
  cfg.label_count = vocab.label_count();
  ParameterSet params;
  register_parameters(cfg, params);
  Rng rng(17);
  init_parameters(cfg, params, rng);

  std::vector<SentenceViews> views;
  for (const auto& s : fx.train) views.push_back(build_views(s, fx.contexts, fx.align, vocab));

  const LossConfig lc{true, true, true};
  std::vector<BatchItem> batch;
  for (std::size_t i = 0; i < 3; ++i) batch.push_back({&views[i], i});

  // Zero learning rates keep the parameters fixed, so the reported means can
  // be recomputed directly.
  AdamWConfig opt_cfg;
  opt_cfg.lr_encoder = 0.0;
  opt_cfg.lr_crf = 0.0;
  AdamW opt(params, opt_cfg);
  StepWorkspace ws = make_workspace(params, 3);

  const StepStats stats = train_step(cfg, batch, lc, params, opt, ws, 2);

  double text = 0.0, cross = 0.0, cva = 0.0, total = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const SentenceLoss l = sentence_loss(cfg, params, views[i], lc);
    text += l.text_nll / 3;
    cross += l.cross_nll / 3;
    cva += l.cva_cross_entropy / 3;
    total += l.total / 3;
  }
  CHECK(stats.mean.text_nll == doctest::Approx(text).epsilon(1e-12));
  CHECK(stats.mean.cross_nll == doctest::Approx(cross).epsilon(1e-12));
  CHECK(stats.mean.cva_cross_entropy == doctest::Approx(cva).epsilon(1e-12));
  CHECK(stats.mean.total == doctest::Approx(total).epsilon(1e-12));
  CHECK(stats.grad_norm > 0.0);
}

TEST_CASE("a non-finite loss aborts and names the sentence") {
  const TrainFixture fx;
  const Vocabulary vocab = build_vocab(fx.train, {}, 1);
  EncoderConfig cfg = fx.dims;
  cfg.vocab_size = vocab.token_count();
  cfg.label_count = vocab.label_count();
  ParameterSet params;
  register_parameters(cfg, params);
  Rng rng(17);
  init_parameters(cfg, params, rng);
  params.at("embed.token")(0, 0) = std::numeric_limits<double>::infinity();

  std::vector<SentenceViews> views;
  views.push_back(build_views(fx.train[0], fx.contexts, fx.align, vocab));
  std::vector<BatchItem> batch = {{&views[0], 41}};

  AdamW opt(params, AdamWConfig{});
  StepWorkspace ws = make_workspace(params, 1);
  try {
    train_step(cfg, batch, LossConfig{true, false, false}, params, opt, ws, 1);
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("sentence") != std::string::npos);
    CHECK(msg.find("41") != std::string::npos);
  }
}

TEST_CASE("training is deterministic and independent of the worker count") {
  const TrainFixture fx;
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.seeds = {11};

  auto run = [&]() {
    return ita::train(fx.train, {}, fx.train, fx.contexts, fx.align, fx.dims, cfg);
  };

  const TempDir dir;
  const TrainOutcome a = run();
  const TrainOutcome b = run();
  REQUIRE(a.checkpoints.size() == 1);
  CHECK(checkpoint_bytes(a.checkpoints[0], dir, "a") == checkpoint_bytes(b.checkpoints[0], dir, "b"));

  setenv("ITA_THREADS", "1", 1);
  const TrainOutcome serial = run();
  unsetenv("ITA_THREADS");
  CHECK(checkpoint_bytes(serial.checkpoints[0], dir, "serial") ==
        checkpoint_bytes(a.checkpoints[0], dir, "a2"));
}

TEST_CASE("an empty dev split keeps the final epoch") {
  const TrainFixture fx;
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.seeds = {5};
  const TrainOutcome outcome =
      ita::train(fx.train, {}, fx.train, fx.contexts, fx.align, fx.dims, cfg);
  REQUIRE(outcome.report.seeds.size() == 1);
  CHECK(outcome.report.seeds[0].best_epoch == 2);
  CHECK(outcome.report.seeds[0].epochs.size() == 3);
}

TEST_CASE("training rejects an empty training set") {
  const TrainFixture fx;
  CHECK_THROWS_AS(ita::train({}, {}, {}, fx.contexts, fx.align, fx.dims, TrainConfig{}),
                  DataError);
}

TEST_CASE("the step log is line-delimited JSON with the loss decomposition") {
  const TrainFixture fx;
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 6;
  cfg.seeds = {2};
  std::ostringstream log;
  ita::train(fx.train, fx.train, fx.train, fx.contexts, fx.align, fx.dims, cfg, &log);

  std::istringstream lines(log.str());
  std::string line;
  std::size_t steps = 0, epochs = 0, seeds = 0;
  while (std::getline(lines, line)) {
    REQUIRE_FALSE(line.empty());
    CHECK(line.front() == '{');
    CHECK(line.back() == '}');
    if (line.find("\"type\":\"step\"") != std::string::npos) {
      ++steps;
      CHECK(line.find("\"loss_text\"") != std::string::npos);
      CHECK(line.find("\"loss_cross\"") != std::string::npos);
      CHECK(line.find("\"loss_cva\"") != std::string::npos);
      CHECK(line.find("\"kl\"") != std::string::npos);
      CHECK(line.find("\"grad_norm\"") != std::string::npos);
    } else if (line.find("\"type\":\"epoch\"") != std::string::npos) {
      ++epochs;
    } else if (line.find("\"type\":\"seed\"") != std::string::npos) {
      ++seeds;
    }
  }
  CHECK(steps == 1);
  CHECK(epochs == 1);
  CHECK(seeds == 1);
}

TEST_CASE("finite differences confirm the training gradient on a toy model") {
  const TrainFixture fx;
  std::vector<std::vector<std::string>> streams;
  for (const auto& s : fx.train)
    if (s.image_id) streams.push_back(linearize_all(*fx.contexts.find(*s.image_id), fx.align));
  const Vocabulary vocab = build_vocab(fx.train, streams, 1);

  EncoderConfig cfg = fx.dims;
  cfg.vocab_size = vocab.token_count();
  cfg.label_count = vocab.label_count();
  ParameterSet params;
  register_parameters(cfg, params);
  Rng rng(23);
  init_parameters(cfg, params, rng);

  const SentenceViews views = build_views(fx.train[0], fx.contexts, fx.align, vocab);
  REQUIRE(views.has_context);

  const AuditReport full =
      finite_difference_audit(cfg, params, views, LossConfig{true, true, true}, 1e-4, 4, 91);
  CHECK(full.max_rel_err <= 1e-4);
  CHECK(full.teacher_path_zero);

  const AuditReport cva_only =
      finite_difference_audit(cfg, params, views, LossConfig{false, false, true}, 1e-4, 4, 92);
  CHECK(cva_only.passed(1e-4));
  CHECK(cva_only.teacher_coords_checked > 0);
}
