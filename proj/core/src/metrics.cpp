#include "msfair/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace msfair {

namespace {

std::optional<double> ratio(double num, double den) {
  if (den <= 0.0) return std::nullopt;
  return num / den;
}

}  // namespace

PolicyEvaluation evaluate(const Policy& policy, const JointDistribution& dist, const StagePlan& plan,
                          const Budgets& budgets) {
  const std::size_t k = plan.stages();
  if (budgets.alphas.size() != k) throw InputError("budgets do not match the stage count");
  if (policy.conditional.size() != k) throw InputError("policy does not match the plan");
  for (std::size_t i = 0; i < k; ++i) {
    if (policy.conditional[i].size() != plan.prefix_count(i)) throw InputError("policy does not match the plan");
  }
  if (plan.decision_features() > dist.space().size() || plan.sensitive >= dist.space().size()) {
    throw InputError("plan indexes features outside the distribution");
  }

  // pass[i][a][y]: P(pass stage i, x_s=a, y).
  std::vector<std::array<std::array<double, 2>, 2>> pass(k, {{{0.0, 0.0}, {0.0, 0.0}}});
  std::array<std::array<double, 2>, 2> group{{{0.0, 0.0}, {0.0, 0.0}}};
  for (CellIndex cell = 0; cell < dist.cell_count(); ++cell) {
    const double m = dist.mass(cell);
    if (m == 0.0) continue;
    const int a = feature_bit(cell, plan.sensitive);
    const double pos = dist.positive(cell);
    group[a][1] += m * pos;
    group[a][0] += m * (1.0 - pos);
    double through = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      through *= policy.conditional[i][prefix_of(cell, plan.cuts[i])];
      pass[i][a][1] += m * pos * through;
      pass[i][a][0] += m * (1.0 - pos) * through;
    }
  }

  PolicyEvaluation e;
  for (std::size_t i = 0; i < k; ++i) {
    const double sel = pass[i][0][0] + pass[i][0][1] + pass[i][1][0] + pass[i][1][1];
    e.selected.push_back(sel);
    std::array<double, 2> dp{}, eo{};
    std::array<std::optional<double>, 2> dps{}, eos{};
    for (int a = 0; a < 2; ++a) {
      const double all = pass[i][a][0] + pass[i][a][1];
      dp[a] = ratio(all, group[a][0] + group[a][1]).value_or(0.0);
      eo[a] = ratio(pass[i][a][1], group[a][1]).value_or(0.0);
      if (i == 0) {
        dps[a] = ratio(all, group[a][0] + group[a][1]);
        eos[a] = ratio(pass[i][a][1], group[a][1]);
      } else {
        dps[a] = ratio(all, pass[i - 1][a][0] + pass[i - 1][a][1]);
        eos[a] = ratio(pass[i][a][1], pass[i - 1][a][1]);
      }
    }
    e.dp_rate.push_back(dp);
    e.eo_rate.push_back(eo);
    e.dp_gap.push_back(std::abs(dp[0] - dp[1]));
    e.eo_gap.push_back(std::abs(eo[0] - eo[1]));
    e.dp_survivor_rate.push_back(dps);
    e.eo_survivor_rate.push_back(eos);
  }
  const double final_sel = e.selected.back();
  e.precision = final_sel > 0.0 ? (pass[k - 1][0][1] + pass[k - 1][1][1]) / final_sel : 0.0;
  return e;
}

double polf(double u_gf, double u_lf) {
  if (!(u_lf > 0.0)) throw InputError("local-fair utility must be positive to form a ratio");
  const double r = u_gf / u_lf;
  if (r < 1.0 - 1e-9) {
    throw InvariantError("global-fair utility " + std::to_string(u_gf) + " is below local-fair utility " +
                         std::to_string(u_lf));
  }
  return r;
}

double polf_bound(const JointDistribution& dist, const Budgets& budgets) {
  const double base = dist.positive_rate();
  const double by_budget = 1.0 / budgets.final_alpha();
  return base > 0.0 ? std::min(by_budget, 1.0 / base) : by_budget;
}

VolfResult volf(const Policy& policy, const JointDistribution& dist, const StagePlan& plan, Criterion criterion) {
  Budgets budgets;
  budgets.alphas.assign(plan.stages(), 1.0);  // evaluation does not depend on the budget values
  const auto e = evaluate(policy, dist, plan, budgets);
  VolfResult out;
  const auto& gaps = e.gap(criterion);
  out.stage_gaps.assign(gaps.begin(), gaps.end() - 1);
  if (!out.stage_gaps.empty()) out.scalar = *std::max_element(out.stage_gaps.begin(), out.stage_gaps.end());
  return out;
}

}  // namespace msfair
