#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "genatk/encoder.hpp"

namespace modelcheck {

using namespace genatk;

inline EncoderConfig tiny_config() {
  EncoderConfig c;
  c.d_model = 8;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_ff = 16;
  c.max_len = 24;
  return c;
}

// Scalar objective built on a tape from registered params.
using Objective = std::function<ad::Var(const ParamVars&)>;

struct TensorError {
  std::string name;
  double rel_error = 0.0;
  double grad_norm = 0.0;
};

// Central differences over every coordinate of every tensor, compared per
// tensor by norm-wise relative error (absolute below 1e-10 in norm).
inline std::vector<TensorError> check_params(const ModelParams& params, const Objective& f,
                                             double h = 1e-5) {
  ad::Tape tape;
  ParamVars pv(tape, params, ad::LeafKind::kTrainable);
  const TensorMap analytic = pv.gradients(tape.backward(f(pv)));
  auto eval = [&](const ModelParams& p) {
    ad::Tape t;
    ParamVars v(t, p, ad::LeafKind::kConstant);
    return f(v).value().item();
  };
  std::vector<TensorError> out;
  ModelParams work = params;
  for (const auto& [name, g] : analytic) {
    Tensor& t = work.tensors.at(name);
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double orig = t[i];
      t[i] = orig + h;
      const double up = eval(work);
      t[i] = orig - h;
      const double down = eval(work);
      t[i] = orig;
      const double num = (up - down) / (2 * h);
      diff2 += (num - g[i]) * (num - g[i]);
      a2 += g[i] * g[i];
      n2 += num * num;
    }
    const double denom = std::max(std::sqrt(a2), std::sqrt(n2));
    out.push_back({name, denom < 1e-10 ? std::sqrt(diff2) : std::sqrt(diff2) / denom, std::sqrt(a2)});
  }
  return out;
}

}  // namespace modelcheck
