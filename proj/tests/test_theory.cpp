#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "klda/theory.hpp"

using klda::Matrix;
using klda::Rng;
using klda::Vector;
namespace th = klda::theory;

namespace {

th::DiscreteDist dist(std::initializer_list<double> probs) {
  th::DiscreteDist d;
  d.p.resize(static_cast<Eigen::Index>(probs.size()));
  Eigen::Index i = 0;
  for (double v : probs) d.p(i++) = v;
  return d;
}

double entropy(const Vector& p) {
  double h = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p(i) > 0) h -= p(i) * std::log(p(i));
  return h;
}

}  // namespace

TEST_CASE("exact KL closed forms and signals") {
  auto p = dist({0.5, 0.5});
  auto q = dist({0.25, 0.75});
  CHECK(th::exact_kl(p, p) == 0.0);
  CHECK(th::exact_kl(p, q) ==
        doctest::Approx(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0))
            .epsilon(1e-12));
  CHECK(th::exact_kl(p, q) == doctest::Approx(0.1438).epsilon(1e-3));

  // support violation is an infinite-KL signal, not an exception
  CHECK(std::isinf(th::exact_kl(dist({0.5, 0.5}), dist({1.0, 0.0}))));
  // 0 log 0 = 0
  CHECK(th::exact_kl(dist({1.0, 0.0}), dist({0.5, 0.5})) ==
        doctest::Approx(std::log(2.0)));
}

TEST_CASE("KL is non-negative on random pairs") {
  Rng rng(2);
  for (int t = 0; t < 10000; ++t) {
    const int n = rng.uniform_int(2, 12);
    CHECK(th::exact_kl(th::random_dist(rng, n), th::random_dist(rng, n)) >=
          -1e-15);
  }
}

TEST_CASE("total variation integral") {
  auto p = dist({0.5, 0.5});
  auto q = dist({0.25, 0.75});
  CHECK(th::total_variation_integral(p, p) == 0.0);
  CHECK(th::total_variation_integral(dist({1, 0}), dist({0, 1})) == 2.0);
  CHECK(th::total_variation_integral(p, q) == doctest::Approx(0.5));
}

TEST_CASE("pinsker inequality") {
  auto p = dist({0.5, 0.5});
  auto q = dist({0.25, 0.75});
  auto same = th::check_pinsker(p, p);
  CHECK(same.lhs == 0.0);
  CHECK(same.rhs == 0.0);
  CHECK(same.holds);

  auto chk = th::check_pinsker(p, q);
  CHECK(chk.lhs == doctest::Approx(0.25));
  CHECK(chk.rhs == doctest::Approx(0.2877).epsilon(1e-3));
  CHECK(chk.holds);

  Rng rng(3);
  for (int t = 0; t < 10000; ++t) {
    const int n = rng.uniform_int(2, 20);
    CHECK(th::check_pinsker(th::random_dist(rng, n), th::random_dist(rng, n)).holds);
  }
}

TEST_CASE("kl chain decomposition") {
  Rng rng(5);
  SUBCASE("identical domains zero every term") {
    auto s = th::random_scenario(rng, 5, 3.0);
    s.p_tgt = s.p_src;
    auto chain = th::kl_chain_decomposition(s);
    CHECK(chain.joint == 0.0);
    CHECK(chain.marginal == 0.0);
    CHECK(chain.expected_conditional == 0.0);
  }
  SUBCASE("residual vanishes on random scenarios") {
    double worst = 0;
    for (int t = 0; t < 1000; ++t) {
      auto chain = th::kl_chain_decomposition(th::random_scenario(rng, 6, 3.0));
      worst = std::max(worst, std::abs(chain.residual));
    }
    CHECK(worst < 1e-10);
  }
  SUBCASE("equal conditionals collapse the chain to the marginal") {
    // both domains share p(y|x) rows; the channel is the identity, so
    // p(y|z) matches too and the conditional term dies
    const int n = 4, ny = 3;
    Matrix rows(n, ny);
    for (int x = 0; x < n; ++x) rows.row(x) = th::random_dist(rng, ny).p.transpose();
    auto px_s = th::random_dist(rng, n);
    auto px_t = th::random_dist(rng, n);
    th::DiscreteScenario s;
    s.p_src.resize(n, ny);
    s.p_tgt.resize(n, ny);
    for (int x = 0; x < n; ++x) {
      s.p_src.row(x) = px_s.p(x) * rows.row(x);
      s.p_tgt.row(x) = px_t.p(x) * rows.row(x);
    }
    s.channel = Matrix::Identity(n, n);
    s.classifier = Matrix::Constant(n, ny, 1.0 / ny);
    s.loss_bound_m = 3.0;
    auto chain = th::kl_chain_decomposition(s);
    CHECK(chain.expected_conditional == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(chain.joint == doctest::Approx(chain.marginal).epsilon(1e-12));
  }
}

TEST_CASE("proposition 1 bound") {
  Rng rng(7);
  SUBCASE("identical domains reduce to the Jensen gap") {
    auto s = th::random_scenario(rng, 5, 3.0);
    s.p_tgt = s.p_src;
    auto chk = th::check_prop1(s);
    CHECK(chk.bound_rhs == doctest::Approx(chk.l_train));
    CHECK(chk.l_test <= chk.l_train + 1e-12);
    CHECK(chk.holds);
  }
  SUBCASE("holds across random scenarios") {
    for (int t = 0; t < 1000; ++t)
      CHECK(th::check_prop1(th::random_scenario(rng, 6, 3.0)).holds);
  }
  SUBCASE("large shift keeps the bound valid with visible slack") {
    auto s = th::random_scenario(rng, 4, 3.0);
    // pile target mass on one cell, keep full support with tiny epsilon
    Matrix t = Matrix::Constant(s.p_src.rows(), s.p_src.cols(), 1e-6);
    t(0, 0) = 1.0;
    s.p_tgt = t / t.sum();
    auto chk = th::check_prop1(s);
    CHECK(chk.holds);
    CHECK(chk.bound_rhs - chk.l_test > 0.0);
  }
  SUBCASE("classifier below the floor is a precondition error") {
    auto s = th::random_scenario(rng, 4, 3.0);
    s.classifier(0, 0) = 1e-4;  // far below exp(-3)
    s.classifier.row(0) /= s.classifier.row(0).sum();
    CHECK_THROWS_AS(th::check_prop1(s), th::PreconditionError);
  }
}

TEST_CASE("mutual information") {
  SUBCASE("independent joint has zero information") {
    Vector a(3), b(2);
    a << 0.2, 0.5, 0.3;
    b << 0.6, 0.4;
    Matrix joint = a * b.transpose();
    CHECK(th::mutual_information(joint) == doctest::Approx(0.0).epsilon(1e-14));
  }
  SUBCASE("perfectly correlated binary pair carries ln 2") {
    Matrix joint(2, 2);
    joint << 0.5, 0.0, 0.0, 0.5;
    CHECK(th::mutual_information(joint) == doctest::Approx(std::log(2.0)));
  }
  SUBCASE("bounded by the marginal entropies") {
    Rng rng(11);
    for (int t = 0; t < 200; ++t) {
      const int a = rng.uniform_int(2, 6), b = rng.uniform_int(2, 6);
      Matrix joint(a, b);
      for (Eigen::Index i = 0; i < joint.size(); ++i)
        joint(i) = -std::log(1.0 - rng.uniform()) + 0.01;
      joint /= joint.sum();
      const double mi = th::mutual_information(joint);
      CHECK(mi >= -1e-12);
      CHECK(mi <= entropy(joint.rowwise().sum()) + 1e-12);
      CHECK(mi <= entropy(joint.colwise().sum().transpose()) + 1e-12);
    }
  }
}

TEST_CASE("proposition 2") {
  Rng rng(13);
  SUBCASE("identity channel: assumptions hold and both sides agree") {
    for (int t = 0; t < 50; ++t) {
      auto s = th::identity_channel_scenario(rng, 6, 3.0);
      auto chk = th::check_prop2(s);
      REQUIRE(chk.assumptions_hold);
      CHECK(chk.lhs == doctest::Approx(chk.rhs).epsilon(1e-10));
      CHECK(chk.holds);
    }
  }
  SUBCASE("sufficient-statistic merges satisfy the inequality") {
    for (int t = 0; t < 150; ++t) {
      auto s = th::sufficient_channel_scenario(rng, 6, 3.0);
      auto chk = th::check_prop2(s);
      REQUIRE(chk.assumptions_hold);
      CHECK(chk.holds);
    }
  }
  SUBCASE("an information-destroying channel fails the sufficiency assumption") {
    auto s = th::sufficient_channel_scenario(rng, 5, 3.0);
    // constant representation: every x maps to z = 0
    s.channel.setZero();
    s.channel.col(0).setOnes();
    // the source must carry label information for the check to bite
    REQUIRE(th::mutual_information(s.p_src) > 1e-6);
    auto chk = th::check_prop2(s);
    CHECK_FALSE(chk.assumptions_hold);
  }
}

TEST_CASE("verification sweep passes and serializes") {
  th::VerifyConfig cfg;
  cfg.pinsker_pairs = 500;
  cfg.tv_pairs = 500;
  cfg.chain_cases = 100;
  cfg.prop1_cases = 100;
  cfg.prop2_cases = 40;
  auto report = th::run_verification(cfg);
  REQUIRE(report.families.size() == 5);
  CHECK(report.all_passed());
  for (const auto& fam : report.families) {
    CAPTURE(fam.name);
    CHECK(fam.cases > 0);
    CHECK(fam.passes + fam.precondition_errors == fam.cases);
    CHECK(fam.failures.empty());
  }
  auto js = report.to_json();
  CHECK(js.find("\"all_passed\":true") != std::string::npos);
  CHECK(js.find("\"name\":\"prop2\"") != std::string::npos);

  // determinism: identical seed, identical report
  CHECK(th::run_verification(cfg).to_json() == js);
}

TEST_CASE("scenario validation rejects malformed tables") {
  Rng rng(17);
  auto s = th::random_scenario(rng, 4, 3.0);
  auto bad = s;
  bad.p_tgt(0, 0) += 0.1;
  CHECK_THROWS_AS(bad.validate(), klda::ContractViolation);
  bad = s;
  bad.channel(0, 0) = -0.2;
  CHECK_THROWS_AS(bad.validate(), klda::ContractViolation);
}
