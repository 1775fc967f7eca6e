#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "deisi/graph.hpp"
#include "deisi/param_store.hpp"

namespace deisi {

// A loss builder records the forward computation of a scalar loss on a fresh
// graph, given leaf vars for every parameter. The same builder serves the
// analytic pass (forward + backward) and the finite-difference pass
// (forward value only), so both sides evaluate the identical computation.
using LossBuilder =
    std::function<Var(Graph&, const std::unordered_map<std::string, Var>&)>;

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_analytic = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> per_param;
  double max_rel_error = 0.0;
};

// Central finite differences (f(t+e) - f(t-e)) / 2e, element by element,
// compared against the reverse-mode gradient. Relative error denominator is
// max(|analytic|, |numeric|, 1e-8).
GradCheckReport grad_check(const LossBuilder& loss_fn, const ParamStore& params,
                           double epsilon = 1e-5);

// Convenience: evaluate the loss value at the given parameters.
double eval_loss(const LossBuilder& loss_fn, const ParamStore& params);

}  // namespace deisi
