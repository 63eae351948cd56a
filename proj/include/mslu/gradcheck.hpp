#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "mslu/autodiff.hpp"
#include "mslu/params.hpp"

namespace mslu {

// Builds a scalar on the tape from the bound parameters.
using TapeObjective = std::function<Var(Tape&, std::span<const Var>)>;

enum class Stencil {
  TwoPoint,   // (f(x+h) - f(x-h)) / 2h, error O(h^2)
  // (8 (f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h, error O(h^4); grouped
  // in differences so an unused coordinate gives exactly zero.
  FourPoint,
  // (45 (f(x+h) - f(x-h)) - 9 (f(x+2h) - f(x-2h)) + (f(x+3h) - f(x-3h))) / 60h, error O(h^6).
  SixPoint,
};

struct GradCheckOptions {
  double step = 1e-5;
  double denominator_floor = 1e-12;
  Stencil stencil = Stencil::TwoPoint;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

// Compares the tape gradient of f against central differences over every
// coordinate of every parameter. The default two-point rule at h = 1e-5 has
// an absolute error near 1e-11, so coordinates whose true gradient is below
// about 1e-6 cannot reach a 1e-5 relative error; the wider stencils at a
// larger h lower that floor to about 1e-13. The error reported is:
//   |analytic - fd| / max(|analytic|, |fd|, floor).
// Throws NumericalError naming the coordinate when f is non-finite at a
// perturbed point.
GradCheckReport grad_check(const TapeObjective& f, const ParamSet& params, GradCheckOptions options = {});

}  // namespace mslu
