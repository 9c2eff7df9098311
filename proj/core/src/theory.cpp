#include "klda/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace klda::theory {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double kl_of_tables(const double* p, const double* q, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return kInf;
    acc += p[i] * std::log(p[i] / q[i]);
  }
  return acc;
}

}  // namespace

void DiscreteDist::validate(double tol) const {
  require(p.size() >= 1, "DiscreteDist: empty outcome space");
  for (Eigen::Index i = 0; i < p.size(); ++i)
    require(p(i) >= 0.0 && p(i) <= 1.0 + tol, "DiscreteDist: entry out of [0,1]");
  require(std::abs(p.sum() - 1.0) <= tol, "DiscreteDist: probabilities must sum to 1");
}

void DiscreteScenario::validate() const {
  require(p_src.rows() >= 1 && p_src.cols() >= 1, "DiscreteScenario: empty tables");
  require(p_tgt.rows() == p_src.rows() && p_tgt.cols() == p_src.cols(),
          "DiscreteScenario: joint table shapes differ");
  require(channel.rows() == p_src.rows(), "DiscreteScenario: channel row count");
  require(classifier.rows() == channel.cols() &&
              classifier.cols() == p_src.cols(),
          "DiscreteScenario: classifier table shape");
  require(loss_bound_m > 0.0, "DiscreteScenario: loss bound must be positive");
  const double tol = 1e-12;
  require(std::abs(p_src.sum() - 1.0) <= tol, "DiscreteScenario: p_src must sum to 1");
  require(std::abs(p_tgt.sum() - 1.0) <= tol, "DiscreteScenario: p_tgt must sum to 1");
  for (Eigen::Index r = 0; r < channel.rows(); ++r)
    require(std::abs(channel.row(r).sum() - 1.0) <= tol,
            "DiscreteScenario: channel rows must sum to 1");
  for (Eigen::Index r = 0; r < classifier.rows(); ++r)
    require(std::abs(classifier.row(r).sum() - 1.0) <= tol,
            "DiscreteScenario: classifier rows must sum to 1");
  require((p_src.array() >= 0.0).all() && (p_tgt.array() >= 0.0).all() &&
              (channel.array() >= 0.0).all() && (classifier.array() >= 0.0).all(),
          "DiscreteScenario: negative probability");
  // support condition: target mass only where the source has mass
  for (Eigen::Index i = 0; i < p_src.size(); ++i)
    require(!(p_tgt(i) > 0.0 && p_src(i) == 0.0),
            "DiscreteScenario: target support exceeds source support");
}

double exact_kl(const DiscreteDist& p, const DiscreteDist& q) {
  require(p.size() == q.size(), "exact_kl: outcome spaces differ");
  return kl_of_tables(p.p.data(), q.p.data(), p.size());
}

double total_variation_integral(const DiscreteDist& p, const DiscreteDist& q) {
  require(p.size() == q.size(), "total_variation_integral: outcome spaces differ");
  return (p.p - q.p).cwiseAbs().sum();
}

PinskerCheck check_pinsker(const DiscreteDist& p, const DiscreteDist& q) {
  PinskerCheck out;
  const double tv = total_variation_integral(p, q);
  out.lhs = tv * tv;
  out.rhs = 2.0 * exact_kl(p, q);
  out.holds = out.lhs <= out.rhs + 1e-12;
  return out;
}

namespace {

// p_S(z,y) and p_T(z,y) as |Z| x |Y| tables
Matrix joint_zy(const Matrix& p_xy, const Matrix& channel) {
  return channel.transpose() * p_xy;
}

}  // namespace

KlChain kl_chain_decomposition(const DiscreteScenario& s) {
  s.validate();
  const Matrix pt = joint_zy(s.p_tgt, s.channel);
  const Matrix ps = joint_zy(s.p_src, s.channel);
  KlChain out;
  out.joint = kl_of_tables(pt.data(), ps.data(), static_cast<int>(pt.size()));

  const Vector pt_z = pt.rowwise().sum();
  const Vector ps_z = ps.rowwise().sum();
  out.marginal = kl_of_tables(pt_z.data(), ps_z.data(), static_cast<int>(pt_z.size()));

  double cond = 0.0;
  for (Eigen::Index z = 0; z < pt.rows(); ++z) {
    if (pt_z(z) == 0.0) continue;
    if (ps_z(z) == 0.0) {
      cond = kInf;
      break;
    }
    for (Eigen::Index y = 0; y < pt.cols(); ++y) {
      if (pt(z, y) == 0.0) continue;
      if (ps(z, y) == 0.0) {
        cond = kInf;
        break;
      }
      cond += pt(z, y) * std::log((pt(z, y) / pt_z(z)) / (ps(z, y) / ps_z(z)));
    }
  }
  out.expected_conditional = cond;
  out.residual = out.joint - out.marginal - out.expected_conditional;
  return out;
}

Prop1Check check_prop1(const DiscreteScenario& s) {
  s.validate();
  const double floor = std::exp(-s.loss_bound_m);
  if ((s.classifier.array() < floor - 1e-12).any())
    throw PreconditionError(
        "check_prop1: classifier entry below exp(-M); loss bound precondition violated");

  Prop1Check out;
  const Matrix ps_zy = joint_zy(s.p_src, s.channel);
  out.l_train = 0.0;
  for (Eigen::Index z = 0; z < ps_zy.rows(); ++z)
    for (Eigen::Index y = 0; y < ps_zy.cols(); ++y)
      if (ps_zy(z, y) > 0.0)
        out.l_train += ps_zy(z, y) * -std::log(s.classifier(z, y));

  // exact averaged predictive distribution per input
  const Matrix predictive = s.channel * s.classifier;  // |X| x |Y|
  out.l_test = 0.0;
  for (Eigen::Index x = 0; x < s.p_tgt.rows(); ++x)
    for (Eigen::Index y = 0; y < s.p_tgt.cols(); ++y)
      if (s.p_tgt(x, y) > 0.0)
        out.l_test += s.p_tgt(x, y) * -std::log(predictive(x, y));

  const Matrix pt_zy = joint_zy(s.p_tgt, s.channel);
  const double kl_joint =
      kl_of_tables(pt_zy.data(), ps_zy.data(), static_cast<int>(pt_zy.size()));
  out.bound_rhs = out.l_train + s.loss_bound_m / std::sqrt(2.0) * std::sqrt(kl_joint);
  out.holds = out.l_test <= out.bound_rhs + 1e-10;
  return out;
}

double mutual_information(const Matrix& joint) {
  require(joint.rows() >= 1 && joint.cols() >= 1, "mutual_information: empty table");
  require((joint.array() >= 0.0).all(), "mutual_information: negative entry");
  require(std::abs(joint.sum() - 1.0) <= 1e-9,
          "mutual_information: table must sum to 1");
  const Vector pa = joint.rowwise().sum();
  const Eigen::RowVectorXd pb = joint.colwise().sum();
  double acc = 0.0;
  for (Eigen::Index a = 0; a < joint.rows(); ++a)
    for (Eigen::Index b = 0; b < joint.cols(); ++b)
      if (joint(a, b) > 0.0)
        acc += joint(a, b) * std::log(joint(a, b) / (pa(a) * pb(b)));
  return acc;
}

Prop2Check check_prop2(const DiscreteScenario& s) {
  s.validate();
  Prop2Check out;

  const Matrix ps_zy = joint_zy(s.p_src, s.channel);
  const Matrix pt_zy = joint_zy(s.p_tgt, s.channel);
  const Vector ps_z = ps_zy.rowwise().sum();
  const Vector pt_z = pt_zy.rowwise().sum();
  const Vector ps_x = s.p_src.rowwise().sum();
  const Vector pt_x = s.p_tgt.rowwise().sum();

  // Assumption 1: the representation keeps all label information
  const double mi_zy = mutual_information(ps_zy);
  const double mi_xy = mutual_information(s.p_src);
  bool ok = std::abs(mi_zy - mi_xy) <= 1e-9;

  // Assumption 2: the source conditional factors through the channel
  Matrix ps_y_given_z(ps_zy.rows(), ps_zy.cols());
  for (Eigen::Index z = 0; z < ps_zy.rows(); ++z) {
    if (ps_z(z) == 0.0) {
      ok = false;
      break;
    }
    ps_y_given_z.row(z) = ps_zy.row(z) / ps_z(z);
  }
  if (ok) {
    const Matrix reconstructed = s.channel * ps_y_given_z;  // |X| x |Y|
    for (Eigen::Index x = 0; x < s.p_src.rows() && ok; ++x) {
      if (ps_x(x) == 0.0) continue;
      for (Eigen::Index y = 0; y < s.p_src.cols() && ok; ++y)
        ok = std::abs(s.p_src(x, y) / ps_x(x) - reconstructed(x, y)) <= 1e-9;
    }
  }
  out.assumptions_hold = ok;
  if (!ok) return out;

  // conditional misalignment in representation space
  double lhs = 0.0;
  for (Eigen::Index z = 0; z < pt_zy.rows() && std::isfinite(lhs); ++z) {
    if (pt_z(z) == 0.0) continue;
    for (Eigen::Index y = 0; y < pt_zy.cols(); ++y) {
      if (pt_zy(z, y) == 0.0) continue;
      if (ps_zy(z, y) == 0.0) {
        lhs = kInf;
        break;
      }
      lhs += pt_zy(z, y) *
             std::log((pt_zy(z, y) / pt_z(z)) / (ps_zy(z, y) / ps_z(z)));
    }
  }

  // conditional misalignment in input space
  double rhs = 0.0;
  for (Eigen::Index x = 0; x < s.p_tgt.rows() && std::isfinite(rhs); ++x) {
    if (pt_x(x) == 0.0) continue;
    for (Eigen::Index y = 0; y < s.p_tgt.cols(); ++y) {
      if (s.p_tgt(x, y) == 0.0) continue;
      if (s.p_src(x, y) == 0.0) {
        rhs = kInf;
        break;
      }
      rhs += s.p_tgt(x, y) *
             std::log((s.p_tgt(x, y) / pt_x(x)) / (s.p_src(x, y) / ps_x(x)));
    }
  }

  out.lhs = lhs;
  out.rhs = rhs;
  out.holds = lhs <= rhs + 1e-10;
  return out;
}

DiscreteDist random_dist(Rng& rng, int n) {
  require(n >= 1, "random_dist: empty outcome space");
  DiscreteDist d;
  d.p.resize(n);
  for (int i = 0; i < n; ++i)
    d.p(i) = -std::log(1.0 - rng.uniform()) + 0.01;  // exponential + floor
  d.p /= d.p.sum();
  return d;
}

namespace {

Matrix random_joint(Rng& rng, int rows, int cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m(i) = -std::log(1.0 - rng.uniform()) + 0.01;
  return m / m.sum();
}

Matrix bounded_classifier(Rng& rng, int n_z, int n_y, double loss_bound_m) {
  const double floor = std::exp(-loss_bound_m);
  require(floor * n_y < 1.0, "bounded_classifier: floor too large for |Y|");
  const double rescale = 1.0 - floor * n_y;
  Matrix c(n_z, n_y);
  for (int z = 0; z < n_z; ++z)
    c.row(z) = (random_dist(rng, n_y).p.transpose() * rescale).array() + floor;
  return c;
}

}  // namespace

DiscreteScenario random_scenario(Rng& rng, int max_size, double loss_bound_m) {
  require(max_size >= 2, "random_scenario: max_size must be at least 2");
  const int nx = rng.uniform_int(2, max_size);
  const int ny = rng.uniform_int(2, max_size);
  const int nz = rng.uniform_int(2, max_size);
  DiscreteScenario s;
  s.p_src = random_joint(rng, nx, ny);
  s.p_tgt = random_joint(rng, nx, ny);
  s.channel.resize(nx, nz);
  for (int x = 0; x < nx; ++x) s.channel.row(x) = random_dist(rng, nz).p.transpose();
  s.classifier = bounded_classifier(rng, nz, ny, loss_bound_m);
  s.loss_bound_m = loss_bound_m;
  return s;
}

DiscreteScenario sufficient_channel_scenario(Rng& rng, int max_size,
                                             double loss_bound_m) {
  require(max_size >= 2, "sufficient_channel_scenario: max_size must be at least 2");
  const int nz = rng.uniform_int(2, max_size);
  const int nx = rng.uniform_int(nz, max_size);
  const int ny = rng.uniform_int(2, max_size);

  // surjective merge map x -> z
  std::vector<int> group(static_cast<std::size_t>(nx));
  for (int x = 0; x < nz; ++x) group[static_cast<std::size_t>(x)] = x;
  for (int x = nz; x < nx; ++x)
    group[static_cast<std::size_t>(x)] = rng.uniform_int(0, nz - 1);
  rng.shuffle(group.begin(), group.end());

  // one conditional label row per group; merged x-values share it exactly
  Matrix rows(nz, ny);
  for (int z = 0; z < nz; ++z) rows.row(z) = random_dist(rng, ny).p.transpose();

  DiscreteDist px = random_dist(rng, nx);
  DiscreteScenario s;
  s.p_src.resize(nx, ny);
  s.channel = Matrix::Zero(nx, nz);
  for (int x = 0; x < nx; ++x) {
    s.p_src.row(x) = px.p(x) * rows.row(group[static_cast<std::size_t>(x)]);
    s.channel(x, group[static_cast<std::size_t>(x)]) = 1.0;
  }
  s.p_tgt = random_joint(rng, nx, ny);
  s.classifier = bounded_classifier(rng, nz, ny, loss_bound_m);
  s.loss_bound_m = loss_bound_m;
  return s;
}

DiscreteScenario identity_channel_scenario(Rng& rng, int max_size,
                                           double loss_bound_m) {
  const int n = rng.uniform_int(2, max_size);
  const int ny = rng.uniform_int(2, max_size);
  DiscreteScenario s;
  s.p_src = random_joint(rng, n, ny);
  s.p_tgt = random_joint(rng, n, ny);
  s.channel = Matrix::Identity(n, n);
  s.classifier = bounded_classifier(rng, n, ny, loss_bound_m);
  s.loss_bound_m = loss_bound_m;
  return s;
}

namespace {

void dump_matrix(std::ostringstream& out, const char* name, const Matrix& m) {
  out << "\"" << name << "\":[";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (r) out << ",";
    out << "[";
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ",";
      out << m(r, c);
    }
    out << "]";
  }
  out << "]";
}

std::string dump_scenario(const DiscreteScenario& s, const std::string& note) {
  std::ostringstream out;
  out.precision(17);
  out << "{\"note\":\"" << note << "\",";
  dump_matrix(out, "p_src", s.p_src);
  out << ",";
  dump_matrix(out, "p_tgt", s.p_tgt);
  out << ",";
  dump_matrix(out, "channel", s.channel);
  out << ",";
  dump_matrix(out, "classifier", s.classifier);
  out << ",\"loss_bound_m\":" << s.loss_bound_m << "}";
  return out.str();
}

}  // namespace

bool VerificationReport::all_passed() const {
  for (const auto& f : families)
    if (!f.all_passed()) return false;
  return true;
}

std::string VerificationReport::to_json() const {
  std::ostringstream out;
  out.precision(17);
  out << "{\"all_passed\":" << (all_passed() ? "true" : "false")
      << ",\"families\":[";
  for (std::size_t i = 0; i < families.size(); ++i) {
    const auto& f = families[i];
    if (i) out << ",";
    out << "{\"name\":\"" << f.name << "\",\"cases\":" << f.cases
        << ",\"passes\":" << f.passes
        << ",\"precondition_errors\":" << f.precondition_errors
        << ",\"worst_slack\":" << f.worst_slack << ",\"failures\":[";
    for (std::size_t k = 0; k < f.failures.size(); ++k) {
      if (k) out << ",";
      out << f.failures[k];
    }
    out << "]}";
  }
  out << "]}";
  return out.str();
}

VerificationReport run_verification(const VerifyConfig& cfg) {
  VerificationReport report;
  Rng rng(cfg.seed);

  {
    CheckFamilyResult fam;
    fam.name = "pinsker";
    fam.worst_slack = kInf;
    for (int t = 0; t < cfg.pinsker_pairs; ++t) {
      const int n = rng.uniform_int(2, 20);
      auto p = random_dist(rng, n);
      auto q = random_dist(rng, n);
      auto chk = check_pinsker(p, q);
      ++fam.cases;
      if (chk.holds) ++fam.passes;
      fam.worst_slack = std::min(fam.worst_slack, chk.rhs - chk.lhs);
    }
    report.families.push_back(std::move(fam));
  }

  {
    // positive-part mass equals half the unhalved total variation
    CheckFamilyResult fam;
    fam.name = "tv_halving";
    fam.worst_slack = 0.0;
    for (int t = 0; t < cfg.tv_pairs; ++t) {
      const int n = rng.uniform_int(2, 20);
      auto p = random_dist(rng, n);
      auto q = random_dist(rng, n);
      double positive_part = 0.0;
      for (int i = 0; i < n; ++i)
        if (p.p(i) >= q.p(i)) positive_part += p.p(i) - q.p(i);
      const double deviation =
          std::abs(positive_part - 0.5 * total_variation_integral(p, q));
      ++fam.cases;
      if (deviation <= 1e-12) ++fam.passes;
      fam.worst_slack = std::max(fam.worst_slack, deviation);
    }
    report.families.push_back(std::move(fam));
  }

  {
    CheckFamilyResult fam;
    fam.name = "kl_chain";
    fam.worst_slack = 0.0;
    for (int t = 0; t < cfg.chain_cases; ++t) {
      auto s = random_scenario(rng, cfg.max_size, cfg.loss_bound_m);
      auto chain = kl_chain_decomposition(s);
      ++fam.cases;
      if (std::abs(chain.residual) < 1e-10)
        ++fam.passes;
      else
        fam.failures.push_back(dump_scenario(s, "kl_chain residual"));
      fam.worst_slack = std::max(fam.worst_slack, std::abs(chain.residual));
    }
    report.families.push_back(std::move(fam));
  }

  {
    CheckFamilyResult fam;
    fam.name = "prop1";
    fam.worst_slack = kInf;
    for (int t = 0; t < cfg.prop1_cases; ++t) {
      auto s = random_scenario(rng, cfg.max_size, cfg.loss_bound_m);
      ++fam.cases;
      try {
        auto chk = check_prop1(s);
        if (chk.holds)
          ++fam.passes;
        else
          fam.failures.push_back(dump_scenario(s, "prop1 bound violated"));
        fam.worst_slack = std::min(fam.worst_slack, chk.bound_rhs - chk.l_test);
      } catch (const PreconditionError&) {
        ++fam.precondition_errors;
      }
    }
    report.families.push_back(std::move(fam));
  }

  {
    CheckFamilyResult fam;
    fam.name = "prop2";
    fam.worst_slack = kInf;
    for (int t = 0; t < cfg.prop2_cases; ++t) {
      auto s = (t % 5 == 0)
                   ? identity_channel_scenario(rng, cfg.max_size, cfg.loss_bound_m)
                   : sufficient_channel_scenario(rng, cfg.max_size,
                                                 cfg.loss_bound_m);
      ++fam.cases;
      auto chk = check_prop2(s);
      if (chk.assumptions_hold && chk.holds) {
        ++fam.passes;
        fam.worst_slack = std::min(fam.worst_slack, chk.rhs - chk.lhs);
      } else {
        fam.failures.push_back(dump_scenario(
            s, chk.assumptions_hold ? "prop2 inequality violated"
                                    : "prop2 assumptions unexpectedly violated"));
      }
    }
    report.families.push_back(std::move(fam));
  }

  return report;
}

}  // namespace klda::theory
