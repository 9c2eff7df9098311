#pragma once

#include <algorithm>
#include <cmath>

#include "klda/autodiff.hpp"
#include "klda/param.hpp"

// Central finite-difference oracle for gradients, independent of the
// reverse-mode path it checks.
namespace testsupport {

inline double objective_value(const klda::ad::ObjectiveFn& f,
                              const klda::ParamVector& params) {
  klda::ad::Tape tape;
  std::vector<klda::ad::Var> vars;
  for (const auto& e : params.entries) vars.push_back(tape.input(e.value));
  return tape.scalar_value(f(tape, vars));
}

inline klda::ParamVector finite_difference_grad(const klda::ad::ObjectiveFn& f,
                                                const klda::ParamVector& params,
                                                double h = 1e-5) {
  klda::ParamVector grad = klda::ParamVector::zeros_like(params);
  klda::ParamVector work = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& value = work[i].value;
    for (Eigen::Index k = 0; k < value.size(); ++k) {
      const double saved = value(k);
      value(k) = saved + h;
      const double fp = objective_value(f, work);
      value(k) = saved - h;
      const double fm = objective_value(f, work);
      value(k) = saved;
      grad[i].value(k) = (fp - fm) / (2.0 * h);
    }
  }
  return grad;
}

// Per-entry relative error with a floor so near-zero entries are compared
// on an absolute scale.
inline double rel_error(double a, double b, double floor = 1e-4) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double max_rel_error(const klda::ParamVector& analytic,
                            const klda::ParamVector& numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i)
    for (Eigen::Index k = 0; k < analytic[i].value.size(); ++k)
      worst = std::max(worst,
                       rel_error(analytic[i].value(k), numeric[i].value(k)));
  return worst;
}

// Analytic reverse-mode gradient vs central differences at `params`.
inline double gradcheck_error(const klda::ad::ObjectiveFn& f,
                              const klda::ParamVector& params,
                              double h = 1e-5) {
  const auto analytic = klda::ad::value_and_grad(f, params);
  const auto numeric = finite_difference_grad(f, params, h);
  return max_rel_error(analytic.grad, numeric);
}

}  // namespace testsupport
