#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "pedalid/autodiff/tape.hpp"
#include "pedalid/autodiff/tensor.hpp"

namespace pedalid::ad {

/// A scalar-valued function of tensors that were registered as its inputs.
using ScalarFn = std::function<Tensor(Tape&)>;

struct GradCheckOptions {
  double step = 1e-5;
  /// Coordinates to skip, e.g. PReLU kink points: (input index, flat index) -> skip.
  std::function<bool(std::size_t, std::size_t)> exclude;
  /// Floor of the relative-error denominator.
  double denominator_floor = 1e-8;
  /// Also skip coordinates where central differences at h and h/2 disagree
  /// by more than kink_tolerance (relative, same floor): the perturbation
  /// crossed a kink somewhere inside f. Costs two more evaluations each.
  bool skip_kinks = false;
  double kink_tolerance = 1e-4;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::size_t kinks = 0;  // skipped by the kink test, not counted in `skipped`
};

/// Compares backward() gradients of `f` w.r.t. each tensor in `inputs` against
/// central differences (f(x+h e_i) - f(x-h e_i)) / 2h. The relative error of a
/// coordinate is |a-b| / max(|a|, |b|, floor), floor 1e-8 by default. Inputs are made differentiable
/// for the duration of the check and restored afterwards.
GradCheckResult finite_diff_check(const ScalarFn& f, std::vector<Tensor> inputs,
                                  const GradCheckOptions& options = {});

/// Single-input convenience form returning only the maximum relative error.
double finite_diff_check(const std::function<Tensor(Tape&, const Tensor&)>& f, Tensor x,
                         double step = 1e-5);

}  // namespace pedalid::ad
