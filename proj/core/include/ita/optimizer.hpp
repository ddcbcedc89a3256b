#pragma once

#include <cstddef>

#include "ita/params.hpp"

namespace ita {

struct AdamWConfig {
  double lr_encoder = 1e-3;  // every tensor except the CRF tables
  double lr_crf = 1e-2;      // crf.* tables, mirroring a separate CRF-layer rate
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;  // decoupled: theta -= lr * wd * theta
  double clip_norm = 5.0;      // global gradient norm bound; <= 0 disables
};

// Scales grads so the global L2 norm is at most clip_norm and returns the
// pre-clip norm. No-op when clip_norm <= 0 or the norm is already within.
double clip_global_norm(ParameterSet& grads, double clip_norm);

// Adaptive moment estimation with bias correction and decoupled weight
// decay. The rate is chosen per tensor (crf.* vs the rest); decay multiplies
// the same rate, so a zero rate freezes its group entirely.
class AdamW {
 public:
  AdamW(const ParameterSet& params, const AdamWConfig& cfg);

  // Clips grads in place, applies one update, returns the pre-clip norm.
  double step(ParameterSet& params, ParameterSet& grads);

  std::size_t steps_taken() const { return t_; }

 private:
  AdamWConfig cfg_;
  ParameterSet m_;
  ParameterSet v_;
  std::size_t t_ = 0;
};

}  // namespace ita
