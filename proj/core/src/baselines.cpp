#include "klda/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace klda {

void KernelBank::validate() const {
  require(!bandwidths.empty(), "KernelBank: empty kernel bank");
  for (double g : bandwidths)
    require(g > 0.0, "KernelBank: bandwidths must be positive");
}

KernelBank KernelBank::median_ladder(const Matrix& joined_rows) {
  const Eigen::Index n = joined_rows.rows();
  require(n >= 2, "median_ladder: need at least two rows");
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      dists.push_back((joined_rows.row(i) - joined_rows.row(j)).norm());
  std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
  double med = dists[dists.size() / 2];
  if (med <= 0.0) med = 1.0;  // degenerate batch of identical rows
  KernelBank bank;
  for (int p = -3; p <= 3; ++p) bank.bandwidths.push_back(std::ldexp(med, p));
  return bank;
}

namespace {

void check_batches(const Matrix& a, const Matrix& b, const char* who) {
  require(a.cols() == b.cols(), std::string(who) + ": dimension mismatch");
  require(a.rows() >= 2 && b.rows() >= 2,
          std::string(who) + ": need at least two rows per batch");
}

}  // namespace

double coral_penalty(const Matrix& z_src, const Matrix& z_tgt) {
  check_batches(z_src, z_tgt, "coral_penalty");
  const double d = static_cast<double>(z_src.cols());
  Eigen::RowVectorXd m_s = z_src.colwise().mean();
  Eigen::RowVectorXd m_t = z_tgt.colwise().mean();
  Matrix cs = z_src.rowwise() - m_s;
  Matrix ct = z_tgt.rowwise() - m_t;
  Matrix cov_s = cs.transpose() * cs / static_cast<double>(z_src.rows() - 1);
  Matrix cov_t = ct.transpose() * ct / static_cast<double>(z_tgt.rows() - 1);
  return (cov_s - cov_t).squaredNorm() / (d * d) +
         (m_s - m_t).squaredNorm() / d;
}

double mmd_penalty(const Matrix& z_src, const Matrix& z_tgt,
                   const KernelBank& kernels) {
  check_batches(z_src, z_tgt, "mmd_penalty");
  kernels.validate();

  auto mean_kernel = [](const Matrix& a, const Matrix& b, double gamma) {
    double acc = 0.0;
    const double scale = -1.0 / (2.0 * gamma * gamma);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < b.rows(); ++j)
        acc += std::exp(scale * (a.row(i) - b.row(j)).squaredNorm());
    return acc / static_cast<double>(a.rows() * b.rows());
  };

  double total = 0.0;
  for (double g : kernels.bandwidths)
    total += mean_kernel(z_src, z_src, g) + mean_kernel(z_tgt, z_tgt, g) -
             2.0 * mean_kernel(z_src, z_tgt, g);
  return total / static_cast<double>(kernels.bandwidths.size());
}

namespace graph {

using ad::Tape;
using ad::Var;

Var coral_penalty(Tape& tp, Var z_src, Var z_tgt) {
  check_batches(tp.value(z_src), tp.value(z_tgt), "coral_penalty");
  const double d = static_cast<double>(tp.value(z_src).cols());

  auto moments = [&tp](Var z) {
    const double b = static_cast<double>(tp.value(z).rows());
    Var mean = tp.mul_scalar(tp.sum_cols(z), 1.0 / b);  // [1 x d]
    Var centered = tp.add_rowvec(z, tp.neg(mean));
    Var cov = tp.mul_scalar(tp.matmul_tn(centered, centered), 1.0 / (b - 1.0));
    return std::pair<Var, Var>{mean, cov};
  };

  auto [m_s, cov_s] = moments(z_src);
  auto [m_t, cov_t] = moments(z_tgt);
  Var dc = tp.sub(cov_s, cov_t);
  Var dm = tp.sub(m_s, m_t);
  return tp.add(tp.mul_scalar(tp.sum(tp.mul(dc, dc)), 1.0 / (d * d)),
                tp.mul_scalar(tp.sum(tp.mul(dm, dm)), 1.0 / d));
}

Var mmd_penalty(Tape& tp, Var z_src, Var z_tgt, const KernelBank& kernels) {
  check_batches(tp.value(z_src), tp.value(z_tgt), "mmd_penalty");
  kernels.validate();

  // pairwise squared distances via the usual rank-one expansion
  auto sqdist = [&tp](Var a, Var b) {
    Var ra = tp.sum_rows(tp.mul(a, a));                   // [m x 1]
    Var rb = tp.sum_rows(tp.mul(b, b));                   // [n x 1]
    Var cross = tp.mul_scalar(tp.matmul_nt(a, b), -2.0);  // [m x n]
    return tp.add_colvec(tp.add_rowvec(cross, tp.transpose(rb)), ra);
  };

  Var d_ss = sqdist(z_src, z_src);
  Var d_tt = sqdist(z_tgt, z_tgt);
  Var d_st = sqdist(z_src, z_tgt);

  Var total;
  bool first = true;
  for (double g : kernels.bandwidths) {
    const double scale = -1.0 / (2.0 * g * g);
    Var term = tp.sub(
        tp.add(tp.mean(tp.exp(tp.mul_scalar(d_ss, scale))),
               tp.mean(tp.exp(tp.mul_scalar(d_tt, scale)))),
        tp.mul_scalar(tp.mean(tp.exp(tp.mul_scalar(d_st, scale))), 2.0));
    total = first ? term : tp.add(total, term);
    first = false;
  }
  return tp.mul_scalar(total, 1.0 / static_cast<double>(kernels.bandwidths.size()));
}

}  // namespace graph

}  // namespace klda
