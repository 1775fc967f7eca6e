#pragma once

#include <map>
#include <string>

#include "deisi/param_store.hpp"
#include "deisi/tensor.hpp"

namespace deisi {

using GradMap = std::map<std::string, Tensor>;

// Adam optimizer state: first/second moments per parameter plus the shared
// step counter and hyperparameters.
struct AdamState {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;

  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
};

// One bias-corrected Adam update over every registered parameter. A missing
// gradient for a registered parameter is an error: silent staleness is how
// training bugs hide.
void adam_step(ParamStore& params, const GradMap& grads, AdamState& state);

}  // namespace deisi
