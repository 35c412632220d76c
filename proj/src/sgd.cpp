#include "cgdetect/sgd.hpp"

#include <cmath>

namespace cgd {

void SgdConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("lr must be positive");
  if (!(lr_gamma > 0.0 && lr_gamma <= 1.0)) throw ConfigError("lr_gamma must be in (0, 1]");
  if (lr_step_epochs < 1) throw ConfigError("lr_step must be >= 1");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
}

double learning_rate(const SgdConfig& cfg, int epoch) {
  return cfg.lr0 * std::pow(cfg.lr_gamma, epoch / cfg.lr_step_epochs);
}

template <typename T>
void sgd_step(ParamStore<T>& params, int epoch, const SgdConfig& cfg) {
  const double lr = learning_rate(cfg, epoch);
  for (auto& e : params.entries()) {
    if (!is_learnable(e.kind)) continue;
    const double wd = is_decayed(e.kind) ? cfg.weight_decay : 0.0;
    auto value = e.value.values();
    auto grad = e.grad.values();
    for (std::size_t i = 0; i < value.size(); ++i) {
      value[i] = static_cast<T>(value[i] - lr * (grad[i] + wd * value[i]));
    }
    e.grad.fill(T{0});
  }
}

template void sgd_step(ParamStore<float>&, int, const SgdConfig&);
template void sgd_step(ParamStore<double>&, int, const SgdConfig&);

}  // namespace cgd
