#include "ita/optimizer.hpp"

#include <cmath>

#include "ita/errors.hpp"

namespace ita {

double clip_global_norm(ParameterSet& grads, double clip_norm) {
  const double norm = std::sqrt(grads.squared_norm());
  if (clip_norm > 0.0 && norm > clip_norm) grads.scale(clip_norm / norm);
  return norm;
}

AdamW::AdamW(const ParameterSet& params, const AdamWConfig& cfg)
    : cfg_(cfg), m_(params.zeros_like()), v_(params.zeros_like()) {
  if (cfg.lr_encoder < 0.0 || cfg.lr_crf < 0.0)
    throw ConfigError("learning rates must be nonnegative");
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0)
    throw ConfigError("moment coefficients must lie in [0, 1)");
  if (cfg.epsilon <= 0.0) throw ConfigError("optimizer epsilon must be positive");
  if (cfg.weight_decay < 0.0) throw ConfigError("weight decay must be nonnegative");
}

double AdamW::step(ParameterSet& params, ParameterSet& grads) {
  const double pre_norm = clip_global_norm(grads, cfg_.clip_norm);
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.count(); ++i) {
    NamedTensor& p = params.item(i);
    const double lr = p.name.starts_with("crf.") ? cfg_.lr_crf : cfg_.lr_encoder;
    std::vector<double>& theta = p.value.values();
    const std::vector<double>& g = grads.item(i).value.values();
    std::vector<double>& m = m_.item(i).value.values();
    std::vector<double>& v = v_.item(i).value.values();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      const double step_dir = (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.epsilon);
      theta[j] -= lr * (step_dir + cfg_.weight_decay * theta[j]);
    }
  }
  return pre_norm;
}

}  // namespace ita
