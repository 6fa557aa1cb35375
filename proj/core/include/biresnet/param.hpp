#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "biresnet/errors.hpp"
#include "biresnet/tensor.hpp"

namespace biresnet {

// Named trainable tensor with its gradient accumulator and Adam moments.
// `weight_decay_applies` marks conv/dense weight tensors; L2 never touches
// batch-norm gamma/beta or biases.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> m;
  Tensor<T> v;
  std::int64_t step_count = 0;
  bool weight_decay_applies = false;

  Parameter(std::string param_name, Tensor<T> initial, bool decays)
      : name(std::move(param_name)),
        value(std::move(initial)),
        grad(value.shape()),
        m(value.shape()),
        v(value.shape()),
        weight_decay_applies(decays) {}

  void zero_grad() { grad.fill(T(0)); }
};

template <typename T>
using ParamPtr = std::shared_ptr<Parameter<T>>;
template <typename T>
using ParamList = std::vector<ParamPtr<T>>;

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay_l2 = 0.0;
};

// Bias-corrected Adam with optional L2 on weight-decay-eligible tensors
// (added to the gradient before the moment updates).
template <typename T>
void adam_step(ParamList<T>& params, const AdamConfig& cfg) {
  if (cfg.lr <= 0.0) {
    throw UsageError("adam_step: learning rate must be positive, got " +
                     std::to_string(cfg.lr));
  }
  for (auto& p : params) {
    p->step_count += 1;
    const double t = static_cast<double>(p->step_count);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    const T lam = static_cast<T>(
        p->weight_decay_applies ? cfg.weight_decay_l2 : 0.0);
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = static_cast<double>(p->grad[i]) +
                       static_cast<double>(lam) * static_cast<double>(p->value[i]);
      const double m = cfg.beta1 * static_cast<double>(p->m[i]) +
                       (1.0 - cfg.beta1) * g;
      const double v = cfg.beta2 * static_cast<double>(p->v[i]) +
                       (1.0 - cfg.beta2) * g * g;
      p->m[i] = static_cast<T>(m);
      p->v[i] = static_cast<T>(v);
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      p->value[i] = static_cast<T>(static_cast<double>(p->value[i]) -
                                   cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

}  // namespace biresnet
