#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "klda/error.hpp"
#include "klda/param.hpp"
#include "klda/rng.hpp"

namespace klda::theory {

// Raised when a check's hypotheses are violated (e.g. a classifier entry
// below the loss-bound floor); distinct from an inequality failing.
struct PreconditionError : ContractViolation {
  using ContractViolation::ContractViolation;
};

// Finite distribution over indexed outcomes.
struct DiscreteDist {
  Vector p;

  int size() const { return static_cast<int>(p.size()); }
  void validate(double tol = 1e-12) const;
};

// Finite tables for one domain-shift configuration: joint input/label
// distributions for both domains, the shared representation channel and a
// bounded-loss classifier table.
struct DiscreteScenario {
  Matrix p_src;       // |X| x |Y|, sums to 1
  Matrix p_tgt;       // |X| x |Y|, sums to 1
  Matrix channel;     // |X| x |Z|, rows sum to 1 (z given x)
  Matrix classifier;  // |Z| x |Y|, rows sum to 1, entries >= exp(-M)
  double loss_bound_m = 3.0;

  int n_x() const { return static_cast<int>(p_src.rows()); }
  int n_y() const { return static_cast<int>(p_src.cols()); }
  int n_z() const { return static_cast<int>(channel.cols()); }
  void validate() const;
};

// sum p log(p/q) with 0 log(0/q) = 0; +infinity signals an absolute-
// continuity violation (mass of p where q has none), not a numeric error.
double exact_kl(const DiscreteDist& p, const DiscreteDist& q);

// Unhalved total variation: sum |p - q|.
double total_variation_integral(const DiscreteDist& p, const DiscreteDist& q);

struct PinskerCheck {
  double lhs = 0.0;  // (sum |p-q|)^2
  double rhs = 0.0;  // 2 KL(p|q)
  bool holds = false;
};
PinskerCheck check_pinsker(const DiscreteDist& p, const DiscreteDist& q);

struct KlChain {
  double joint = 0.0;
  double marginal = 0.0;
  double expected_conditional = 0.0;
  double residual = 0.0;  // joint - marginal - expected_conditional
};
// Exhaustive decomposition of KL[p_T(z,y) | p_S(z,y)] into the marginal
// term plus the expected conditional term.
KlChain kl_chain_decomposition(const DiscreteScenario& s);

struct Prop1Check {
  double l_test = 0.0;
  double l_train = 0.0;
  double bound_rhs = 0.0;
  bool holds = false;
};
// Generalization bound: the exact target loss of the averaged predictive
// distribution against train loss + (M/sqrt(2)) sqrt(KL of the joints).
Prop1Check check_prop1(const DiscreteScenario& s);

// Mutual information of a joint table (rows = first variable).
double mutual_information(const Matrix& joint);

struct Prop2Check {
  double lhs = 0.0;  // conditional misalignment in representation space
  double rhs = 0.0;  // conditional misalignment in input space
  bool assumptions_hold = false;
  bool holds = false;  // meaningful only when assumptions_hold
};
Prop2Check check_prop2(const DiscreteScenario& s);

// Generators. Random scenarios have full support everywhere; the
// sufficient-channel construction merges x-values that share identical
// conditional label rows, which makes both assumptions hold exactly.
DiscreteDist random_dist(Rng& rng, int n);
DiscreteScenario random_scenario(Rng& rng, int max_size, double loss_bound_m);
DiscreteScenario sufficient_channel_scenario(Rng& rng, int max_size,
                                             double loss_bound_m);
DiscreteScenario identity_channel_scenario(Rng& rng, int max_size,
                                           double loss_bound_m);

struct CheckFamilyResult {
  std::string name;
  int cases = 0;
  int passes = 0;
  int precondition_errors = 0;
  double worst_slack = 0.0;  // smallest margin to violation seen
  std::vector<std::string> failures;  // serialized scenario dumps

  bool all_passed() const { return passes + precondition_errors == cases; }
};

struct VerifyConfig {
  std::uint64_t seed = 20240917;
  int max_size = 6;
  double loss_bound_m = 3.0;
  int pinsker_pairs = 10000;
  int tv_pairs = 10000;
  int chain_cases = 1000;
  int prop1_cases = 1000;
  int prop2_cases = 120;
};

struct VerificationReport {
  std::vector<CheckFamilyResult> families;

  bool all_passed() const;
  std::string to_json() const;
};

VerificationReport run_verification(const VerifyConfig& cfg);

}  // namespace klda::theory
