#include "ccan/optim.hpp"

#include <cmath>
#include <string>

#include "ccan/error.hpp"

namespace ccan {

void adam_step(std::span<Tensor> params, AdamState& state, double lr, const AdamConfig& config) {
  if (!(lr > 0.0)) throw UsageError("adam_step: learning rate must be > 0");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.numel(), Scalar{0});
      state.v.emplace_back(p.numel(), Scalar{0});
    }
  }
  if (state.m.size() != params.size()) {
    throw UsageError("adam_step: state tracks " + std::to_string(state.m.size()) + " parameters, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i].numel()) {
      throw UsageError("adam_step: moment shape mismatch for parameter " + std::to_string(i));
    }
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].mutable_data();
    auto g = params[i].grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double grad = g.empty() ? 0.0 : static_cast<double>(g[k]);
      double value = static_cast<double>(p[k]);
      value -= lr * config.weight_decay * value;
      const double mk = config.beta1 * static_cast<double>(m[k]) + (1.0 - config.beta1) * grad;
      const double vk = config.beta2 * static_cast<double>(v[k]) + (1.0 - config.beta2) * grad * grad;
      m[k] = static_cast<Scalar>(mk);
      v[k] = static_cast<Scalar>(vk);
      value -= lr * (mk / c1) / (std::sqrt(vk / c2) + config.eps);
      p[k] = static_cast<Scalar>(value);
    }
  }
}

void TrainConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("train config: " + msg);
  };
  need(lr0 > 0.0, "lr0 must be > 0");
  need(epochs >= 1, "epochs must be >= 1");
  need(adam.beta1 >= 0.0 && adam.beta1 < 1.0, "beta1 must lie in [0, 1)");
  need(adam.beta2 >= 0.0 && adam.beta2 < 1.0, "beta2 must lie in [0, 1)");
  need(adam.weight_decay >= 0.0, "weight_decay must be >= 0");
  need(lr_factor > 0.0 && lr_factor < 1.0, "lr_factor must lie in (0, 1)");
  need(lr_decay_every >= 1, "lr_decay_every must be >= 1");
  need(v >= 1 && batch >= 1 && batch % v == 0, "batch must be a positive multiple of v");
  need(loss.tau > 0.0, "tau must be > 0");
  need(loss.epsilon >= 0.0 && loss.epsilon < 1.0, "epsilon_lsr must lie in [0, 1)");
  need(loss.r >= 1, "r must be >= 1");
}

double lr_at(std::size_t epoch, const TrainConfig& config) {
  if (epoch < config.lr_plateau) return config.lr0;
  const std::size_t decays = 1 + (epoch - config.lr_plateau) / config.lr_decay_every;
  return config.lr0 * std::pow(config.lr_factor, static_cast<double>(decays));
}

}  // namespace ccan
