#pragma once

#include <vector>

#include "klda/autodiff.hpp"
#include "klda/param.hpp"

namespace klda {

// Gaussian-kernel bandwidths for the multi-kernel MMD penalty.
struct KernelBank {
  std::vector<double> bandwidths;

  void validate() const;
  // Seven bandwidths 2^{-3}..2^{3} times the median pairwise distance of
  // the joined rows.
  static KernelBank median_ladder(const Matrix& joined_rows);
};

// Squared Frobenius distance between batch covariances (1/(B-1) normalized)
// scaled by 1/d^2, plus squared distance between batch means scaled by 1/d.
double coral_penalty(const Matrix& z_src, const Matrix& z_tgt);

// Multi-kernel biased MMD^2: mean over kernels of
// mean(K_ss) + mean(K_tt) - 2 mean(K_st), kernels exp(-||a-b||^2 / (2 g^2)).
double mmd_penalty(const Matrix& z_src, const Matrix& z_tgt,
                   const KernelBank& kernels);

namespace graph {

ad::Var coral_penalty(ad::Tape& tp, ad::Var z_src, ad::Var z_tgt);
ad::Var mmd_penalty(ad::Tape& tp, ad::Var z_src, ad::Var z_tgt,
                    const KernelBank& kernels);

}  // namespace graph

}  // namespace klda
