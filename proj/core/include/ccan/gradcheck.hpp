#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ccan/tensor.hpp"

namespace ccan {

struct GradCheckOptions {
  double h = 1e-5;
  double tol = 1e-4;
  // Coordinates probed per input; 0 probes every coordinate.
  std::size_t max_coords_per_input = 0;
  // Draws the probed coordinates when subsampling.
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
  std::size_t checked = 0;
  // Probes whose +-h interval crossed a ReLU/max/hinge/mining decision and
  // were replaced (subsampled mode) or dropped (exhaustive mode).
  std::size_t straddled = 0;
  // Probes with 0 < max(|analytic|, |numeric|) < eps * |f| / (h * tol): a
  // one-ulp change in f already exceeds the tolerance there. Replaced or
  // dropped like straddled probes.
  std::size_t unresolved = 0;
  // Location and values of the worst coordinate.
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  std::string describe() const;
};

// Relative error |a - n| / max(1e-8, |a| + |n|).
double relative_error(double analytic, double numeric);

// Compares reverse-mode gradients of the scalar `f` with central differences
// (f(x+h) - f(x-h)) / 2h for every (or a sampled subset of) coordinate of
// `inputs`. `f` must read the current values of `inputs` on every call.
GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                           const GradCheckOptions& options = {});

}  // namespace ccan
