#include "genatk/optim.hpp"

#include <cmath>

#include "genatk/errors.hpp"

namespace genatk {

void adam_step(TensorMap& params, const TensorMap& grads, AdamState& state, const AdamConfig& cfg) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);

  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw ContractError("adam_step: no parameter named " + name);
    Tensor& p = it->second;
    if (!p.same_shape(g)) {
      throw DimensionError("adam_step: gradient " + g.shape_str() + " for " + name + " " +
                           p.shape_str());
    }
    auto [mi, m_new] = state.m.try_emplace(name, g.zeros_like());
    auto [vi, v_new] = state.v.try_emplace(name, g.zeros_like());
    Tensor& m = mi->second;
    Tensor& v = vi->second;
    if (!m.same_shape(p) || !v.same_shape(p)) {
      throw DimensionError("adam_step: moment shape mismatch for " + name);
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

}  // namespace genatk
