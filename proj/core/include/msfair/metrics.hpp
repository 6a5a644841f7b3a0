#pragma once

#include <array>
#include <optional>
#include <vector>

#include "msfair/model.hpp"

namespace msfair {

/// Exact evaluation of a policy against a distribution. Stage vectors are
/// indexed 0..k-1; group arrays are indexed by the sensitive value.
struct PolicyEvaluation {
  double precision = 0.0;      // P(y=1 | selected at stage k); 0 when nothing is selected
  std::vector<double> selected;  // P(pass stage i)

  // P(pass stage i | x_s=a) and P(pass stage i | y=1, x_s=a).
  std::vector<std::array<double, 2>> dp_rate;
  std::vector<std::array<double, 2>> eo_rate;
  std::vector<double> dp_gap;
  std::vector<double> eo_gap;

  // P(pass stage i | passed stage i-1, x_s=a) (and with y=1 for eo); empty
  // when the conditioning event has probability 0.
  std::vector<std::array<std::optional<double>, 2>> dp_survivor_rate;
  std::vector<std::array<std::optional<double>, 2>> eo_survivor_rate;

  const std::vector<double>& gap(Criterion c) const {
    return c == Criterion::DemographicParity ? dp_gap : eo_gap;
  }
  const std::vector<std::array<double, 2>>& rate(Criterion c) const {
    return c == Criterion::DemographicParity ? dp_rate : eo_rate;
  }
};

/// Sums over every cell using the products of the policy's conditional pass
/// probabilities. Throws InputError if the policy does not match the plan or
/// the budgets do not match the stage count.
PolicyEvaluation evaluate(const Policy& policy, const JointDistribution& dist, const StagePlan& plan,
                          const Budgets& budgets);

/// Price of local fairness: u_gf / u_lf. Throws InputError when u_lf <= 0 and
/// InvariantError when the ratio falls below 1 - 1e-9.
double polf(double u_gf, double u_lf);

/// min(1/alpha_k, 1/P(y=1)).
double polf_bound(const JointDistribution& dist, const Budgets& budgets);

struct VolfResult {
  std::vector<double> stage_gaps;  // stages 1..k-1
  double scalar = 0.0;             // stage-1 gap for k = 2, max gap otherwise
};

/// Violation of local fairness of a (globally fair) policy.
VolfResult volf(const Policy& policy, const JointDistribution& dist, const StagePlan& plan, Criterion criterion);

}  // namespace msfair
