#pragma once

#include "cgdetect/param_store.hpp"

namespace cgd {

/// Plain SGD with weight decay and a step learning-rate schedule.
/// Defaults are the published training settings.
struct SgdConfig {
  double lr0 = 1e-3;
  double lr_gamma = 0.5;
  int lr_step_epochs = 20;
  double weight_decay = 1e-3;
  int batch_size = 64;
  int epochs = 120;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  friend bool operator==(const SgdConfig&, const SgdConfig&) = default;
};

/// lr0 * lr_gamma ^ floor(epoch / lr_step_epochs)
double learning_rate(const SgdConfig& cfg, int epoch);

/// p <- p - lr * (grad + wd * p) for every learnable entry (decay only on
/// conv/linear weights), then zeroes all gradients.
template <typename T>
void sgd_step(ParamStore<T>& params, int epoch, const SgdConfig& cfg);

}  // namespace cgd
