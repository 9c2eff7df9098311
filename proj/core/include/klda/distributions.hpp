#pragma once

#include <vector>

#include "klda/autodiff.hpp"
#include "klda/param.hpp"

namespace klda {

// Diagonal-covariance Gaussian over representation space; the per-input
// output of the encoder. Variance is carried as log-variance so it stays
// positive by construction.
struct DiagGaussian {
  Vector mean;
  Vector log_var;

  int dim() const { return static_cast<int>(mean.size()); }
  void validate() const;
};

// Equal-weight mixture of the per-example Gaussians of one minibatch; the
// minibatch stand-in for a domain's representation distribution.
struct BatchMixture {
  std::vector<DiagGaussian> components;

  int size() const { return static_cast<int>(components.size()); }
  int dim() const;
  void validate() const;
};

// log N(z; mu, diag(sigma^2))
double gaussian_log_density(const DiagGaussian& g, const Vector& z);

// mu + sigma .* eps with eps drawn upstream from a standard normal.
Vector sample_reparam(const DiagGaussian& g, const Vector& eps);

// Overflow-safe log of the equal-weight mixture density.
double mixture_log_density(const BatchMixture& m, const Vector& z);

// KL[g1 | g2] in closed form; the oracle for the minibatch estimators.
double gaussian_kl_closed_form(const DiagGaussian& g1, const DiagGaussian& g2);

struct KlEstimates {
  double reverse_kl = 0.0;  // KL[target(z) | source(z)] estimate
  double forward_kl = 0.0;  // KL[source(z) | target(z)] estimate
};

// Single-minibatch estimates of both KL directions: each term averages
// mixture log-density ratios at one sampled z per component.
KlEstimates minibatch_kl_terms(const BatchMixture& src, const BatchMixture& tgt,
                               const std::vector<Vector>& z_src,
                               const std::vector<Vector>& z_tgt);

namespace graph {

// Tape-side mixture: stacked [B x d_z] component means and log-variances,
// typically the encoder output of one minibatch.
struct MixtureVars {
  ad::Var mu;
  ad::Var log_var;
};

// z = mu + exp(0.5 * log_var) .* eps, rowwise; eps is a constant.
ad::Var sample_reparam_rows(ad::Tape& tp, const MixtureVars& mix,
                            const Matrix& eps);

// Log mixture density at each row of z: [N x 1]. Assembled from three
// rank-one expansions of the pairwise Mahalanobis quadratic so the whole
// [N x B] evaluation is a handful of GEMMs.
ad::Var mixture_log_density_rows(ad::Tape& tp, const MixtureVars& mix,
                                 ad::Var z);

struct KlEstimateVars {
  ad::Var reverse_kl;
  ad::Var forward_kl;
};

// Differentiable counterpart of minibatch_kl_terms; gradients flow through
// both the densities and the sampled z rows.
KlEstimateVars minibatch_kl_terms(ad::Tape& tp, const MixtureVars& src,
                                  const MixtureVars& tgt, ad::Var z_src,
                                  ad::Var z_tgt);

}  // namespace graph

}  // namespace klda
