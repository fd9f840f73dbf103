#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lpdet/tensor.hpp"

namespace lpdet {

// Central finite differences vs. analytic gradients over every element of
// every leaf. `make_loss` rebuilds the graph from the (perturbed) leaves.
// Relative error uses a small denominator floor so zero-gradient entries
// compare cleanly. Requires the f64 engine mode.
double max_rel_grad_error(std::vector<Tensor> leaves, const std::function<Tensor()>& make_loss,
                          double step = 1e-5);

struct GradCheckResult {
  std::string name;
  double max_err = 0;
  double tolerance = 0;
  int seeds = 0;
  bool pass = false;
};

// Finite-difference audit of every differentiable op and loss term, each
// over `seeds` random instances at 64-bit.
std::vector<GradCheckResult> run_gradcheck_suite(int seeds);

}  // namespace lpdet
