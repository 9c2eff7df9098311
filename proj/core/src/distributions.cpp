#include "klda/distributions.hpp"

#include <cmath>

namespace klda {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112353;
}

void DiagGaussian::validate() const {
  require(mean.size() == log_var.size(),
          "DiagGaussian: mean/log_var lengths differ");
  require(mean.allFinite() && log_var.allFinite(),
          "DiagGaussian: non-finite field");
}

int BatchMixture::dim() const {
  require(!components.empty(), "BatchMixture: empty mixture");
  return components.front().dim();
}

void BatchMixture::validate() const {
  require(!components.empty(), "BatchMixture: empty mixture");
  const int d = components.front().dim();
  for (const auto& c : components) {
    c.validate();
    require(c.dim() == d, "BatchMixture: components disagree on dimension");
  }
}

double gaussian_log_density(const DiagGaussian& g, const Vector& z) {
  require(z.size() == g.mean.size(),
          "gaussian_log_density: dimension mismatch");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const double diff = z(j) - g.mean(j);
    acc += g.log_var(j) + diff * diff * std::exp(-g.log_var(j));
  }
  return -0.5 * (static_cast<double>(z.size()) * kLog2Pi + acc);
}

Vector sample_reparam(const DiagGaussian& g, const Vector& eps) {
  require(eps.size() == g.mean.size(), "sample_reparam: dimension mismatch");
  return g.mean.array() + (0.5 * g.log_var.array()).exp() * eps.array();
}

double mixture_log_density(const BatchMixture& m, const Vector& z) {
  m.validate();
  require(z.size() == m.dim(), "mixture_log_density: dimension mismatch");
  Vector lds(m.size());
  for (int i = 0; i < m.size(); ++i)
    lds(i) = gaussian_log_density(m.components[static_cast<std::size_t>(i)], z);
  const double top = lds.maxCoeff();
  return top + std::log((lds.array() - top).exp().sum()) -
         std::log(static_cast<double>(m.size()));
}

double gaussian_kl_closed_form(const DiagGaussian& g1, const DiagGaussian& g2) {
  require(g1.dim() == g2.dim(), "gaussian_kl_closed_form: dimension mismatch");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < g1.mean.size(); ++j) {
    const double lv1 = g1.log_var(j), lv2 = g2.log_var(j);
    const double dm = g1.mean(j) - g2.mean(j);
    acc += 0.5 * (lv2 - lv1) +
           (std::exp(lv1) + dm * dm) / (2.0 * std::exp(lv2)) - 0.5;
  }
  return acc;
}

KlEstimates minibatch_kl_terms(const BatchMixture& src, const BatchMixture& tgt,
                               const std::vector<Vector>& z_src,
                               const std::vector<Vector>& z_tgt) {
  src.validate();
  tgt.validate();
  require(src.dim() == tgt.dim(), "minibatch_kl_terms: dimension mismatch");
  require(static_cast<int>(z_src.size()) == src.size() &&
              static_cast<int>(z_tgt.size()) == tgt.size(),
          "minibatch_kl_terms: one sample per component required");

  KlEstimates est;
  for (const auto& z : z_tgt)
    est.reverse_kl += mixture_log_density(tgt, z) - mixture_log_density(src, z);
  est.reverse_kl /= static_cast<double>(z_tgt.size());
  for (const auto& z : z_src)
    est.forward_kl += mixture_log_density(src, z) - mixture_log_density(tgt, z);
  est.forward_kl /= static_cast<double>(z_src.size());
  return est;
}

namespace graph {

using ad::Tape;
using ad::Var;

Var sample_reparam_rows(Tape& tp, const MixtureVars& mix, const Matrix& eps) {
  Var sigma = tp.exp(tp.mul_scalar(mix.log_var, 0.5));
  return tp.add(mix.mu, tp.mul(sigma, tp.constant(eps)));
}

Var mixture_log_density_rows(Tape& tp, const MixtureVars& mix, Var z) {
  const auto b = tp.value(mix.mu).rows();
  const auto d = tp.value(mix.mu).cols();
  require(b >= 1, "mixture_log_density_rows: empty mixture");
  require(tp.value(mix.log_var).rows() == b && tp.value(mix.log_var).cols() == d,
          "mixture_log_density_rows: mu/log_var shapes differ");
  require(tp.value(z).cols() == d,
          "mixture_log_density_rows: dimension mismatch");

  Var inv_var = tp.exp(tp.neg(mix.log_var));             // [B x d]
  Var mu_iv = tp.mul(mix.mu, inv_var);                   // [B x d]
  // quad(i,j) = sum_k (z_ik - mu_jk)^2 / var_jk, expanded into GEMMs
  Var zz_iv = tp.matmul_nt(tp.mul(z, z), inv_var);       // [N x B]
  Var cross = tp.matmul_nt(z, mu_iv);                    // [N x B]
  Var mu2_iv = tp.transpose(tp.sum_rows(tp.mul(mix.mu, mu_iv)));  // [1 x B]
  Var quad = tp.add_rowvec(tp.sub(zz_iv, tp.mul_scalar(cross, 2.0)), mu2_iv);
  // log-det + dimension constant per component
  Var log_det = tp.add_scalar(tp.transpose(tp.sum_rows(mix.log_var)),
                              static_cast<double>(d) * kLog2Pi);  // [1 x B]
  Var comp_log_density = tp.mul_scalar(tp.add_rowvec(quad, log_det), -0.5);
  return tp.add_scalar(tp.logsumexp_rows(comp_log_density),
                       -std::log(static_cast<double>(b)));
}

KlEstimateVars minibatch_kl_terms(Tape& tp, const MixtureVars& src,
                                  const MixtureVars& tgt, Var z_src,
                                  Var z_tgt) {
  require(tp.value(src.mu).rows() == tp.value(z_src).rows() &&
              tp.value(tgt.mu).rows() == tp.value(z_tgt).rows(),
          "minibatch_kl_terms: one sample per component required");
  KlEstimateVars est;
  est.reverse_kl = tp.mean(tp.sub(mixture_log_density_rows(tp, tgt, z_tgt),
                                  mixture_log_density_rows(tp, src, z_tgt)));
  est.forward_kl = tp.mean(tp.sub(mixture_log_density_rows(tp, src, z_src),
                                  mixture_log_density_rows(tp, tgt, z_src)));
  return est;
}

}  // namespace graph

}  // namespace klda
