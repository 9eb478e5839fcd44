#pragma once

// Central finite-difference check of Model::loss_and_gradient.

#include <algorithm>
#include <cmath>
#include <vector>

#include "eqlab/neural/model.hpp"
#include "eqlab/rng.hpp"

namespace testgen {

struct GradCheck {
  double max_relative_error = 0.0;
  std::size_t parameters = 0;
};

// Relative error |a - n| / max(|a| + |n|, 1e-6) per parameter, h = 1e-5.
inline GradCheck check_gradient(eqlab::neural::Model& model, std::size_t batch, std::uint64_t seed) {
  eqlab::Rng rng(seed);
  std::vector<double> in(batch * model.input_size()), target(batch * model.output_size());
  for (auto& v : in) v = rng.normal();
  for (auto& v : target) v = rng.normal();
  std::vector<double> grad(model.parameter_count());
  eqlab::neural::Workspace ws;
  model.loss_and_gradient(in, target, batch, grad, ws);

  GradCheck r;
  r.parameters = model.parameter_count();
  const double h = 1e-5;
  for (std::size_t i = 0; i < model.parameter_count(); ++i) {
    const double orig = model.params()[i];
    model.params()[i] = orig + h;
    const double lp = model.loss(in, target, batch);
    model.params()[i] = orig - h;
    const double lm = model.loss(in, target, batch);
    model.params()[i] = orig;
    const double fd = (lp - lm) / (2.0 * h);
    const double rel = std::abs(fd - grad[i]) / std::max(1e-6, std::abs(fd) + std::abs(grad[i]));
    r.max_relative_error = std::max(r.max_relative_error, rel);
  }
  return r;
}

}  // namespace testgen
