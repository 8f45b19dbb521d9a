#pragma once

#include <cstdint>
#include <vector>

#include "pedalid/nn/layers.hpp"

namespace pedalid::train {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moments per parameter, in registry order.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update of every parameter from its current grad.
/// Throws NumericError naming the first parameter with a non-finite gradient;
/// no parameter is modified in that case.
void adam_step(std::vector<nn::NamedTensor>& params, AdamState& state, double lr,
               const AdamConfig& cfg = {});

}  // namespace pedalid::train
