#include "mslu/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mslu/errors.hpp"

namespace mslu {
namespace {

double evaluate(const TapeObjective& f, const ParamSet& params) {
  Tape tape;
  const auto bound = params.bind(tape, false);
  const Var out = f(tape, bound);
  if (out.value().size() != 1) throw DimensionError("grad_check objective must be scalar");
  return out.scalar();
}

}  // namespace

GradCheckReport grad_check(const TapeObjective& f, const ParamSet& params, GradCheckOptions options) {
  if (!(options.step > 0.0)) throw InputError("grad_check step must be positive");

  std::vector<Tensor> analytic;
  {
    Tape tape;
    const auto bound = params.bind(tape, true);
    const Var out = f(tape, bound);
    tape.backward(out);
    analytic = params.grads(tape, bound);
  }

  GradCheckReport report;
  ParamSet probe = params;
  for (std::size_t p = 0; p < probe.size(); ++p) {
    for (std::size_t j = 0; j < probe[p].size(); ++j) {
      const double original = probe[p][j];
      const auto at = [&](double offset) {
        probe[p][j] = original + offset;
        const double v = evaluate(f, probe);
        probe[p][j] = original;
        if (!std::isfinite(v))
          throw NumericalError("non-finite objective when perturbing " + probe.name(p) + "[" + std::to_string(j) + "]");
        return v;
      };
      const double h = options.step;
      const auto diff = [&](double n) { return at(n * h) - at(-n * h); };
      double numeric = 0.0;
      switch (options.stencil) {
        case Stencil::TwoPoint: numeric = diff(1) / (2.0 * h); break;
        case Stencil::FourPoint: numeric = (8.0 * diff(1) - diff(2)) / (12.0 * h); break;
        case Stencil::SixPoint: numeric = (45.0 * diff(1) - 9.0 * diff(2) + diff(3)) / (60.0 * h); break;
      }
      const double a = analytic[p][j];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.coordinates;
      if (rel > report.max_relative_error || report.coordinates == 1) {
        report.max_relative_error = rel;
        report.worst_parameter = probe.name(p);
        report.worst_index = j;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace mslu
