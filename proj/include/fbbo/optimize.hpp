#pragma once

#include <functional>
#include <optional>

#include "fbbo/common.hpp"

namespace fbbo {

// Objective for minimisation: returns f(x) and writes the gradient into grad.
// Non-finite values are treated as infeasible by the line search.
using Objective = std::function<double(const Vector& x, Vector& grad)>;

struct LbfgsOptions {
  int max_iterations = 200;
  int memory = 8;
  double gradient_tolerance = 1e-8;
  double relative_tolerance = 1e-12;
  // Optional box; the iterate is projected onto it and active components of
  // the search direction are frozen.
  std::optional<Vector> lower;
  std::optional<Vector> upper;
};

struct OptimResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Limited-memory BFGS with projected backtracking (Armijo) line search.
OptimResult lbfgs_minimize(const Objective& objective, Vector x0, const LbfgsOptions& options = {});

// Central finite-difference gradient of a scalar function with step h.
Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x,
                          double h);

}  // namespace fbbo
