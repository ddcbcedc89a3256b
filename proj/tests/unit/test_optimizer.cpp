#include <cmath>

#include "doctest.h"
#include "ita/errors.hpp"
#include "ita/optimizer.hpp"
#include "ita/params.hpp"
#include "ita/rng.hpp"

using namespace ita;

TEST_CASE("first adaptive step matches the hand-derived closed form") {
  ParameterSet params;
  params.add("w", 1, 1)(0, 0) = 1.0;

  AdamWConfig cfg;  // lr_encoder 1e-3, betas 0.9/0.999, eps 1e-8, decay 0.01
  AdamW opt(params, cfg);

  ParameterSet grads = params.zeros_like();
  grads.at("w")(0, 0) = 0.5;
  opt.step(params, grads);

  // m1 = 0.1 * 0.5, v1 = 0.001 * 0.25; bias correction restores 0.5 and 0.25,
  // so the step direction is 0.5 / (0.5 + 1e-8) and the decoupled decay adds
  // 0.01 * theta. theta' = 1 - 1e-3 * (0.5 / (0.5 + 1e-8) + 0.01).
  const double expect = 1.0 - 1e-3 * (0.5 / (std::sqrt(0.25) + 1e-8) + 0.01 * 1.0);
  CHECK(params.at("w")(0, 0) == doctest::Approx(expect).epsilon(1e-15));
  CHECK(opt.steps_taken() == 1);
}

TEST_CASE("tensors under the crf prefix use the second learning rate") {
  ParameterSet params;
  params.add("crf.transitions", 1, 1)(0, 0) = 1.0;
  params.add("encoder.w", 1, 1)(0, 0) = 1.0;

  AdamWConfig cfg;
  cfg.lr_encoder = 1e-3;
  cfg.lr_crf = 1e-2;
  cfg.weight_decay = 0.0;
  AdamW opt(params, cfg);

  ParameterSet grads = params.zeros_like();
  grads.at("crf.transitions")(0, 0) = 0.5;
  grads.at("encoder.w")(0, 0) = 0.5;
  opt.step(params, grads);

  const double crf_move = 1.0 - params.at("crf.transitions")(0, 0);
  const double enc_move = 1.0 - params.at("encoder.w")(0, 0);
  CHECK(crf_move == doctest::Approx(10.0 * enc_move).epsilon(1e-9));
}

TEST_CASE("zero learning rate freezes parameters even with weight decay") {
  ParameterSet params;
  params.add("w", 2, 2).fill(3.0);

  AdamWConfig cfg;
  cfg.lr_encoder = 0.0;
  cfg.lr_crf = 0.0;
  cfg.weight_decay = 0.5;
  AdamW opt(params, cfg);

  ParameterSet grads = params.zeros_like();
  grads.at("w").fill(1.0);
  opt.step(params, grads);
  for (const double v : params.at("w").values()) CHECK(v == 3.0);
}

TEST_CASE("gradient clipping rescales to the threshold exactly once crossed") {
  ParameterSet grads;
  grads.add("a", 1, 3);
  grads.at("a")(0, 0) = 3.0;
  grads.at("a")(0, 1) = 4.0;  // norm 5

  SUBCASE("above the threshold") {
    const double before = clip_global_norm(grads, 2.0);
    CHECK(before == doctest::Approx(5.0).epsilon(1e-15));
    const double after = std::sqrt(grads.squared_norm());
    CHECK(std::abs(after - 2.0) <= 1e-9);
  }
  SUBCASE("below the threshold: untouched") {
    const double before = clip_global_norm(grads, 10.0);
    CHECK(before == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(grads.at("a")(0, 0) == 3.0);
    CHECK(grads.at("a")(0, 1) == 4.0);
  }
}

TEST_CASE("adaptive steps drive a quadratic toward its minimum") {
  ParameterSet params;
  params.add("crf.w", 1, 1)(0, 0) = 4.0;

  AdamWConfig cfg;
  cfg.lr_crf = 0.05;
  cfg.weight_decay = 0.0;
  AdamW opt(params, cfg);

  // f(x) = (x - 1)^2 / 2, gradient x - 1.
  for (int i = 0; i < 2000; ++i) {
    ParameterSet grads = params.zeros_like();
    grads.at("crf.w")(0, 0) = params.at("crf.w")(0, 0) - 1.0;
    opt.step(params, grads);
  }
  CHECK(params.at("crf.w")(0, 0) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("optimizer construction validates its configuration") {
  ParameterSet params;
  params.add("w", 1, 1);
  AdamWConfig cfg;
  cfg.beta1 = 1.0;
  CHECK_THROWS_AS(AdamW(params, cfg), ConfigError);
  cfg = AdamWConfig{};
  cfg.epsilon = 0.0;
  CHECK_THROWS_AS(AdamW(params, cfg), ConfigError);
  cfg = AdamWConfig{};
  cfg.lr_encoder = -1.0;
  CHECK_THROWS_AS(AdamW(params, cfg), ConfigError);
  cfg = AdamWConfig{};
  cfg.weight_decay = -0.1;
  CHECK_THROWS_AS(AdamW(params, cfg), ConfigError);
}
