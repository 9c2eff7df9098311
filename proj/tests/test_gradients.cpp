#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "klda/adam.hpp"
#include "klda/autodiff.hpp"
#include "klda/rng.hpp"
#include "support/gradcheck.hpp"

using klda::AdamConfig;
using klda::AdamState;
using klda::Matrix;
using klda::ParamVector;
using klda::Rng;
using klda::ad::ObjectiveFn;
using klda::ad::Tape;
using klda::ad::Var;
using testsupport::gradcheck_error;

namespace {

Matrix random_matrix(Rng& rng, int r, int c, double lo = -2.0, double hi = 2.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.uniform(lo, hi);
  return m;
}

ParamVector single_param(const Matrix& m) {
  ParamVector p;
  p.entries.push_back({"w", m});
  return p;
}

// Weighted sum with fixed random weights so per-entry gradients differ.
Var weighted_scalar(Tape& tp, Var x, Rng& rng) {
  Matrix w = random_matrix(rng, static_cast<int>(tp.value(x).rows()),
                           static_cast<int>(tp.value(x).cols()));
  return tp.sum(tp.mul(x, tp.constant(w)));
}

}  // namespace

TEST_CASE("square function value and gradient") {
  ParamVector p = single_param(Matrix::Constant(1, 1, 3.0));
  auto eval = klda::ad::value_and_grad(
      [](Tape& tp, const std::vector<Var>& v) { return tp.mul(v[0], v[0]); },
      p);
  CHECK(eval.value == doctest::Approx(9.0));
  CHECK(eval.grad[0].value(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("constant objective has zero gradient") {
  ParamVector p = single_param(Matrix::Constant(2, 2, 1.5));
  auto eval = klda::ad::value_and_grad(
      [](Tape& tp, const std::vector<Var>&) {
        return tp.constant(Matrix::Constant(1, 1, 5.0));
      },
      p);
  CHECK(eval.value == doctest::Approx(5.0));
  CHECK(eval.grad[0].value.isZero(0.0));
}

TEST_CASE("two-layer network loss matches finite differences") {
  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    ParamVector p;
    p.entries.push_back({"w1", random_matrix(rng, 4, 3, -0.8, 0.8)});
    p.entries.push_back({"b1", random_matrix(rng, 1, 4, -0.5, 0.5)});
    p.entries.push_back({"w2", random_matrix(rng, 2, 4, -0.8, 0.8)});
    p.entries.push_back({"b2", random_matrix(rng, 1, 2, -0.5, 0.5)});
    Matrix x = random_matrix(rng, 6, 3);
    Matrix target = random_matrix(rng, 6, 2);
    ObjectiveFn f = [&x, &target](Tape& tp, const std::vector<Var>& v) {
      Var h = tp.tanh(tp.affine(tp.constant(x), v[0], v[1]));
      Var out = tp.affine(h, v[2], v[3]);
      Var err = tp.sub(out, tp.constant(target));
      return tp.mean(tp.mul(err, err));
    };
    CHECK(gradcheck_error(f, p) < 1e-6);
  }
}

TEST_CASE("value_and_grad is deterministic bit for bit") {
  Rng rng(3);
  ParamVector p;
  p.entries.push_back({"w", random_matrix(rng, 5, 4)});
  Matrix x = random_matrix(rng, 3, 4);
  ObjectiveFn f = [&x](Tape& tp, const std::vector<Var>& v) {
    return tp.sum(tp.softmax_rows(tp.matmul_nt(tp.constant(x), v[0])));
  };
  auto a = klda::ad::value_and_grad(f, p);
  auto b = klda::ad::value_and_grad(f, p);
  CHECK(std::memcmp(&a.value, &b.value, sizeof(double)) == 0);
  REQUIRE(a.grad[0].value.size() == b.grad[0].value.size());
  CHECK(std::memcmp(a.grad[0].value.data(), b.grad[0].value.data(),
                    sizeof(double) * a.grad[0].value.size()) == 0);
}

TEST_CASE("logsumexp is overflow-safe and shift-equivariant") {
  Rng rng(11);
  Matrix x = random_matrix(rng, 4, 6);
  for (double c : {700.0, -1000.0, 12345.678}) {
    ParamVector p = single_param(x);
    ObjectiveFn base = [](Tape& tp, const std::vector<Var>& v) {
      return tp.sum(tp.logsumexp_rows(v[0]));
    };
    ObjectiveFn shifted = [c](Tape& tp, const std::vector<Var>& v) {
      return tp.sum(tp.logsumexp_rows(tp.add_scalar(v[0], c)));
    };
    auto e0 = klda::ad::value_and_grad(base, p);
    auto e1 = klda::ad::value_and_grad(shifted, p);
    CHECK(std::abs(e1.value - (e0.value + 4.0 * c)) <=
          1e-12 * std::max(1.0, std::abs(4.0 * c)));
    CHECK((e1.grad[0].value - e0.grad[0].value).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("non-finite values raise errors naming the operation") {
  Tape tp;
  Var big = tp.constant(Matrix::Constant(1, 1, 1e6));
  CHECK_THROWS_WITH_AS(tp.exp(big), doctest::Contains("exp"),
                       klda::NumericError);
  Var neg = tp.constant(Matrix::Constant(1, 1, -1.0));
  CHECK_THROWS_WITH_AS(tp.log(neg), doctest::Contains("log"),
                       klda::NumericError);
  Var zero = tp.constant(Matrix::Constant(1, 1, 0.0));
  Var one = tp.constant(Matrix::Constant(1, 1, 1.0));
  CHECK_THROWS_WITH_AS(tp.div(one, zero), doctest::Contains("div"),
                       klda::NumericError);
}

TEST_CASE("shape mismatches are contract violations") {
  Tape tp;
  Var a = tp.constant(Matrix::Zero(2, 3));
  Var b = tp.constant(Matrix::Zero(3, 2));
  CHECK_THROWS_AS(tp.add(a, b), klda::ContractViolation);
  CHECK_THROWS_AS(tp.add_rowvec(a, b), klda::ContractViolation);
  CHECK_THROWS_AS(tp.pick_column(a, {0, 1, 2}), klda::ContractViolation);
  CHECK_THROWS_AS(tp.slice_cols(a, 2, 1), klda::ContractViolation);
}

// Finite-difference sweep over the whole exported op vocabulary; 100
// random trials per op, relative error < 1e-6 per entry.
TEST_CASE("every exported op matches central finite differences") {
  constexpr int kTrials = 100;

  struct OpCase {
    const char* name;
    int rows, cols;
    double lo, hi;
    std::function<Var(Tape&, Var, Rng&)> apply;
  };

  std::vector<OpCase> cases = {
      {"add", 3, 4, -2, 2,
       [](Tape& tp, Var x, Rng& rng) {
         return tp.add(x, tp.constant(random_matrix(rng, 3, 4)));
       }},
      {"sub", 3, 4, -2, 2,
       [](Tape& tp, Var x, Rng& rng) {
         return tp.sub(tp.constant(random_matrix(rng, 3, 4)), x);
       }},
      {"mul", 3, 4, -2, 2,
       [](Tape& tp, Var x, Rng& rng) {
         return tp.mul(x, tp.constant(random_matrix(rng, 3, 4)));
       }},
      {"div", 3, 4, 0.5, 2.0,
       [](Tape& tp, Var x, Rng& rng) {
         return tp.div(tp.constant(random_matrix(rng, 3, 4)), x);
       }},
      {"add_scalar", 3, 4, -2, 2,
       [](Tape& tp, Var x, Rng&) { return tp.add_scalar(x, 0.7); }},
      {"mul_scalar", 3, 4, -2, 2,
       [](Tape& tp, Var x, Rng&) { return tp.mul_scalar(x, -1.3); }},
      {"neg", 3, 4, -2, 2, [](Tape& tp, Var x, Rng&) { return tp.neg(x); }},
      {"exp", 3, 4, -2, 2, [](Tape& tp, Var x, Rng&) { return tp.exp(x); }},
      {"log", 3, 4, 0.5, 3.0, [](Tape& tp, Var x, Rng&) { return tp.log(x); }},
      {"tanh", 3, 4, -2, 2, [](Tape& tp, Var x, Rng&) { return tp.tanh(x); }},
      {"relu", 3, 4, 0.05, 2.0,
       [](Tape& tp, Var x, Rng& rng) {
         // mixed signs away from the kink
         Matrix sign = random_matrix(rng, 3, 4);
         Matrix s = sign.unaryExpr([](double v) { return v < 0 ? -1.0 : 1.0; });
         return tp.relu(tp.mul(x, tp.constant(s)));
       }},
      {"softplus", 3, 4, -3, 3,
       [](Tape& tp, Var x, Rng&) { return tp.softplus(x); }},
      {"matmul_nt", 3, 4, -2, 2,
       [](Tape& tp, Var x, Rng& rng) {
         return tp.matmul_nt(x, tp.constant(random_matrix(rng, 5, 4)));
       }},
      {"matmul_tn", 3, 4, -2, 2,
       [](Tape& tp, Var x, Rng& rng) {
         return tp.matmul_tn(x, tp.constant(random_matrix(rng, 3, 5)));
       }},
      {"transpose", 3, 4, -2, 2,
       [](Tape& tp, Var x, Rng&) { return tp.transpose(x); }},
      {"slice_cols", 3, 4, -2, 2,
       [](Tape& tp, Var x, Rng&) { return tp.slice_cols(x, 1, 3); }},
      {"add_rowvec", 1, 4, -2, 2,
       [](Tape& tp, Var x, Rng& rng) {
         return tp.add_rowvec(tp.constant(random_matrix(rng, 3, 4)), x);
       }},
      {"add_colvec", 3, 1, -2, 2,
       [](Tape& tp, Var x, Rng& rng) {
         return tp.add_colvec(tp.constant(random_matrix(rng, 3, 4)), x);
       }},
      {"sum", 3, 4, -2, 2, [](Tape& tp, Var x, Rng&) { return tp.sum(x); }},
      {"mean", 3, 4, -2, 2, [](Tape& tp, Var x, Rng&) { return tp.mean(x); }},
      {"sum_rows", 3, 4, -2, 2,
       [](Tape& tp, Var x, Rng&) { return tp.sum_rows(x); }},
      {"sum_cols", 3, 4, -2, 2,
       [](Tape& tp, Var x, Rng&) { return tp.sum_cols(x); }},
      {"softmax_rows", 3, 4, -2, 2,
       [](Tape& tp, Var x, Rng&) { return tp.softmax_rows(x); }},
      {"logsumexp_rows", 3, 4, -2, 2,
       [](Tape& tp, Var x, Rng&) { return tp.logsumexp_rows(x); }},
      {"pick_column", 3, 4, -2, 2,
       [](Tape& tp, Var x, Rng& rng) {
         std::vector<int> idx = {rng.uniform_int(0, 3), rng.uniform_int(0, 3),
                                 rng.uniform_int(0, 3)};
         return tp.pick_column(x, idx);
       }},
      {"affine", 3, 4, -2, 2,
       [](Tape& tp, Var x, Rng& rng) {
         return tp.affine(x, tp.constant(random_matrix(rng, 2, 4)),
                          tp.constant(random_matrix(rng, 1, 2)));
       }},
  };

  for (const auto& c : cases) {
    CAPTURE(c.name);
    double worst = 0.0;
    for (int t = 0; t < kTrials; ++t) {
      Rng rng(klda::derive_seed(99, c.name, static_cast<std::uint64_t>(t)));
      ParamVector p = single_param(random_matrix(rng, c.rows, c.cols, c.lo, c.hi));
      // two rng streams: one consumed while building constants inside the
      // objective, advanced identically on every evaluation
      std::uint64_t const_seed = rng.bits();
      ObjectiveFn f = [&c, const_seed](Tape& tp, const std::vector<Var>& v) {
        Rng local(const_seed);
        Var y = c.apply(tp, v[0], local);
        return weighted_scalar(tp, y, local);
      };
      worst = std::max(worst, gradcheck_error(f, p));
    }
    CHECK_MESSAGE(worst < 1e-6, c.name << " worst rel err " << worst);
  }
}

TEST_CASE("adam first step moves each entry by about -lr*sign(g)") {
  ParamVector p;
  p.entries.push_back({"w", Matrix::Constant(2, 2, 1.0)});
  ParamVector g = ParamVector::zeros_like(p);
  g[0].value << 0.3, -0.7, 2.0, -0.004;
  AdamConfig cfg;
  cfg.lr = 0.01;
  auto out = klda::adam_step(p, g, AdamState::init(p), cfg);
  CHECK(out.state.step == 1);
  for (Eigen::Index k = 0; k < 4; ++k) {
    double expected = 1.0 - cfg.lr * (g[0].value(k) > 0 ? 1.0 : -1.0);
    CHECK(out.params[0].value(k) == doctest::Approx(expected).epsilon(1e-4));
  }
}

TEST_CASE("adam zero gradient leaves parameters and moments untouched") {
  ParamVector p;
  p.entries.push_back({"w", Matrix::Constant(3, 1, 0.25)});
  ParamVector g = ParamVector::zeros_like(p);
  auto out = klda::adam_step(p, g, AdamState::init(p), AdamConfig{});
  CHECK(out.params[0].value == p[0].value);
  CHECK(out.state.m[0].value.isZero(0.0));
  CHECK(out.state.v[0].value.isZero(0.0));
  CHECK(out.state.step == 1);
}

TEST_CASE("adam successive steps reproduce the scripted recurrence") {
  // independent scalar transcription of the update rule
  const double lr = 0.003, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double g = 0.8;
  double x = 2.0, m = 0.0, v = 0.0;
  std::vector<double> expected;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    double mh = m / (1 - std::pow(b1, t));
    double vh = v / (1 - std::pow(b2, t));
    x -= lr * mh / (std::sqrt(vh) + eps);
    expected.push_back(x);
  }

  ParamVector p;
  p.entries.push_back({"w", Matrix::Constant(1, 1, 2.0)});
  ParamVector grad = ParamVector::zeros_like(p);
  grad[0].value(0, 0) = g;
  AdamConfig cfg{lr, b1, b2, eps};
  auto s1 = klda::adam_step(p, grad, AdamState::init(p), cfg);
  CHECK(s1.params[0].value(0, 0) == doctest::Approx(expected[0]).epsilon(1e-14));
  auto s2 = klda::adam_step(s1.params, grad, s1.state, cfg);
  CHECK(s2.params[0].value(0, 0) == doctest::Approx(expected[1]).epsilon(1e-14));
  CHECK(s2.state.step == 2);
}

TEST_CASE("adam rejects mismatched shapes") {
  ParamVector p;
  p.entries.push_back({"w", Matrix::Zero(2, 2)});
  ParamVector g;
  g.entries.push_back({"w", Matrix::Zero(3, 2)});
  CHECK_THROWS_AS(klda::adam_step(p, g, AdamState::init(p), AdamConfig{}),
                  klda::ContractViolation);
}
