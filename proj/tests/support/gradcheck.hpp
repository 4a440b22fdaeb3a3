#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "genatk/autodiff.hpp"

namespace gradcheck {

using genatk::Tensor;
namespace ad = genatk::ad;

// Builds a tensor-valued output from leaves on a fresh tape.
using Fn = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

inline Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.raw()) v = u(rng);
  return t;
}

struct Report {
  double max_rel_error = 0.0;
  std::string worst;
};

// Reduces the output to a scalar through a fixed random projection R:
// L = Σ out ⊙ R. Compares reverse-mode gradients of L against central
// differences with step h, per input, using the norm-wise relative error
// ‖g_ad − g_fd‖ / max(‖g_ad‖, ‖g_fd‖). Inputs whose gradients are both below
// 1e-10 in norm compare by absolute difference instead.
inline Report check(const Fn& f, const std::vector<Tensor>& inputs, std::uint64_t seed,
                    double h = 1e-5) {
  std::mt19937_64 rng(seed ^ 0xabcdef);
  Tensor projection;
  {
    ad::Tape probe;
    std::vector<ad::Var> vars;
    for (const auto& t : inputs) vars.push_back(probe.trainable(t));
    projection = random_tensor(f(probe, vars).value().shape(), rng);
  }
  auto loss_of = [&](ad::Tape& tape, const std::vector<ad::Var>& vars) {
    ad::Var out = f(tape, vars);
    return ad::sum(ad::mul(out, tape.constant(projection)));
  };
  auto eval = [&](const std::vector<Tensor>& xs) {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const auto& t : xs) vars.push_back(tape.constant(t));
    return loss_of(tape, vars).value().item();
  };

  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.trainable(t));
  const auto grads = tape.backward(loss_of(tape, vars));

  Report rep;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor analytic = grads.wrt(vars[k]);
    std::vector<Tensor> xs = inputs;
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double orig = xs[k][i];
      xs[k][i] = orig + h;
      const double up = eval(xs);
      xs[k][i] = orig - h;
      const double down = eval(xs);
      xs[k][i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
    }
    const double denom = std::max(std::sqrt(a2), std::sqrt(n2));
    const double err = denom < 1e-10 ? std::sqrt(diff2) : std::sqrt(diff2) / denom;
    if (err > rep.max_rel_error) {
      rep.max_rel_error = err;
      rep.worst = "input " + std::to_string(k);
    }
  }
  return rep;
}

}  // namespace gradcheck
