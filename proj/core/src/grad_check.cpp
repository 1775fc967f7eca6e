#include "deisi/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace deisi {

namespace {

double build_and_eval(const LossBuilder& loss_fn, const ParamStore& params) {
  Graph g;
  std::unordered_map<std::string, Var> vars;
  for (const auto& name : params.names()) vars.emplace(name, g.param(params.at(name)));
  Var loss = loss_fn(g, vars);
  double v = g.value(loss).item();
  if (!std::isfinite(v)) throw std::runtime_error("grad_check: non-finite loss");
  return v;
}

}  // namespace

double eval_loss(const LossBuilder& loss_fn, const ParamStore& params) {
  return build_and_eval(loss_fn, params);
}

GradCheckReport grad_check(const LossBuilder& loss_fn, const ParamStore& params,
                           double epsilon) {
  // Analytic gradients from a single recorded pass.
  Graph g;
  std::unordered_map<std::string, Var> vars;
  for (const auto& name : params.names()) vars.emplace(name, g.param(params.at(name)));
  Var loss = loss_fn(g, vars);
  if (!std::isfinite(g.value(loss).item()))
    throw std::runtime_error("grad_check: non-finite loss");
  g.backward(loss);

  GradCheckReport report;
  ParamStore probe;
  for (const auto& name : params.names()) probe.add(name, params.at(name));

  for (const auto& name : params.names()) {
    Tensor analytic = g.grad(vars.at(name));
    Tensor& theta = probe.at(name);
    GradCheckEntry entry{name, 0.0, 0.0};
    for (std::size_t i = 0; i < theta.size(); ++i) {
      double original = theta[i];
      theta[i] = original + epsilon;
      double up = build_and_eval(loss_fn, probe);
      theta[i] = original - epsilon;
      double down = build_and_eval(loss_fn, probe);
      theta[i] = original;
      double numeric = (up - down) / (2.0 * epsilon);
      double a = analytic[i];
      double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      entry.max_rel_error = std::max(entry.max_rel_error, std::fabs(a - numeric) / denom);
      entry.max_abs_analytic = std::max(entry.max_abs_analytic, std::fabs(a));
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.per_param.push_back(std::move(entry));
  }
  return report;
}

}  // namespace deisi
