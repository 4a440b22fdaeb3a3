#pragma once

#include <cstdint>

#include "genatk/tensor.hpp"

namespace genatk {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::int64_t step = 0;
  TensorMap m;
  TensorMap v;
};

// One bias-corrected Adam update over every entry of `grads`. Each gradient
// must name a tensor in `params` with the same shape; moments are created on
// first use.
void adam_step(TensorMap& params, const TensorMap& grads, AdamState& state, const AdamConfig& cfg);

}  // namespace genatk
