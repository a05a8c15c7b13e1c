#pragma once

#include <functional>
#include <string>

#include "lextree/autodiff.hpp"
#include "lextree/params.hpp"

namespace lextree {

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
  std::size_t coordinates = 0;
  std::string worst;    // "name[index]" of the largest relative error
  std::string failure;  // non-empty when a non-finite value was met
};

// Builds a scalar loss on a fresh graph. Must be deterministic: every call
// with the same parameter values has to produce the same loss.
using LossBuilder = std::function<Expr(Graph&)>;

// Compares analytic gradients against central differences for every
// coordinate of every parameter in `params`. Relative error is
// |a - n| / max(1, |a|, |n|); the check passes when the maximum is strictly
// below `tolerance`.
GradCheckReport grad_check(ParamSet& params, const LossBuilder& build, double tolerance,
                           double step = 1e-5);

}  // namespace lextree
