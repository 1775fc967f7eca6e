#include "deisi/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace deisi {

void adam_step(ParamStore& params, const GradMap& grads, AdamState& state) {
  for (const auto& name : params.names()) {
    auto it = grads.find(name);
    if (it == grads.end())
      throw std::runtime_error("adam_step: missing gradient for parameter '" + name + "'");
    const Tensor& g = it->second;
    const Tensor& p = params.at(name);
    if (!g.same_shape(p))
      throw std::invalid_argument("adam_step: gradient shape " + g.shape_str() +
                                  " does not match parameter '" + name + "' " + p.shape_str());
    if (!g.all_finite())
      throw std::runtime_error("adam_step: non-finite gradient for parameter '" + name + "'");
  }

  state.step += 1;
  double b1t = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double b2t = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  for (const auto& name : params.names()) {
    Tensor& p = params.at(name);
    const Tensor& g = grads.at(name);
    Tensor& m = state.m.try_emplace(name, Tensor::zeros(p.shape())).first->second;
    Tensor& v = state.v.try_emplace(name, Tensor::zeros(p.shape())).first->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      double mhat = m[i] / b1t;
      double vhat = v[i] / b2t;
      p[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace deisi
