#include "msfair/policy.hpp"

#include <algorithm>

namespace msfair {

VariableLayout::VariableLayout(const StagePlan& plan) : cuts_(plan.cuts), offsets_{0} {
  for (std::size_t i = 0; i < cuts_.size(); ++i) offsets_.push_back(offsets_.back() + (std::size_t{1} << cuts_[i]));
}

std::vector<double> build_objective(const JointDistribution& dist, const StagePlan& plan, const Budgets& budgets,
                                    const VariableLayout& layout) {
  std::vector<double> c(layout.total(), 0.0);
  const std::size_t last = plan.stages() - 1;
  const double scale = 1.0 / budgets.final_alpha();
  for (CellIndex cell = 0; cell < dist.cell_count(); ++cell) {
    c[layout.index(last, cell)] += scale * dist.positive(cell) * dist.mass(cell);
  }
  return c;
}

std::vector<lp::Row> build_budget_rows(const JointDistribution& dist, const StagePlan& plan, const Budgets& budgets,
                                       const VariableLayout& layout) {
  std::vector<lp::Row> rows;
  const std::size_t k = plan.stages();
  for (std::size_t i = 0; i < k; ++i) {
    lp::Row row;
    row.coefficients.assign(layout.total(), 0.0);
    for (CellIndex cell = 0; cell < dist.cell_count(); ++cell) row.coefficients[layout.index(i, cell)] += dist.mass(cell);
    row.relation = i + 1 < k ? lp::Relation::LessEqual : lp::Relation::Equal;
    row.rhs = budgets.alphas[i];
    row.label = "budget" + std::to_string(i + 1);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<lp::Row> build_coupling_rows(const VariableLayout& layout) {
  std::vector<lp::Row> rows;
  for (std::size_t i = 1; i < layout.stages(); ++i) {
    for (std::size_t q = 0; q < layout.stage_size(i); ++q) {
      lp::Row row;
      row.coefficients.assign(layout.total(), 0.0);
      row.coefficients[layout.stage_begin(i) + q] = 1.0;
      row.coefficients[layout.index(i - 1, static_cast<CellIndex>(q))] = -1.0;
      row.relation = lp::Relation::LessEqual;
      row.rhs = 0.0;
      row.label = "couple" + std::to_string(i + 1) + "_" + std::to_string(q);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

FairnessRows build_fairness_rows(const JointDistribution& dist, const StagePlan& plan, const FairnessSpec& fairness,
                                 const VariableLayout& layout) {
  FairnessRows out;
  if (fairness.scope == Scope::Unconstrained) return out;

  const bool eo = fairness.criterion == Criterion::EqualOpportunity;
  const auto weight = [&](CellIndex c) { return eo ? dist.mass(c) * dist.positive(c) : dist.mass(c); };
  const double w0 = group_mass(dist, plan.sensitive, 0, eo);
  const double w1 = group_mass(dist, plan.sensitive, 1, eo);

  const std::size_t k = plan.stages();
  const std::size_t first = fairness.scope == Scope::Local ? 0 : k - 1;
  for (std::size_t i = first; i < k; ++i) {
    const std::string label = std::string(to_string(fairness.criterion)) + "_stage" + std::to_string(i + 1);
    if (w0 <= 0.0 || w1 <= 0.0) {
      out.warnings.push_back("dropped " + label + ": group x_s=" + (w0 <= 0.0 ? "0" : "1") +
                             (eo ? " has no positive mass" : " has no mass"));
      continue;
    }
    lp::Row row;
    row.coefficients.assign(layout.total(), 0.0);
    for (CellIndex cell = 0; cell < dist.cell_count(); ++cell) {
      const double w = weight(cell);
      if (w == 0.0) continue;
      const double coef = feature_bit(cell, plan.sensitive) == 0 ? w / w0 : -w / w1;
      row.coefficients[layout.index(i, cell)] += coef;
    }
    row.relation = lp::Relation::Equal;
    row.rhs = 0.0;
    row.label = label;
    out.rows.push_back(std::move(row));
  }
  return out;
}

AssembledProblem assemble(const JointDistribution& dist, const StagePlan& plan, const Budgets& budgets,
                          const FairnessSpec& fairness) {
  require_valid_instance(dist, plan, budgets);
  VariableLayout layout(plan);
  lp::LpProblem problem(layout.total(), 0.0, 1.0);
  problem.objective = build_objective(dist, plan, budgets, layout);
  for (auto& row : build_budget_rows(dist, plan, budgets, layout)) problem.rows.push_back(std::move(row));
  for (auto& row : build_coupling_rows(layout)) problem.rows.push_back(std::move(row));
  auto fair = build_fairness_rows(dist, plan, fairness, layout);
  for (auto& row : fair.rows) problem.rows.push_back(std::move(row));
  return AssembledProblem{std::move(problem), std::move(layout), std::move(fair.warnings)};
}

Policy recover_policy(const lp::LpSolution& solution, const VariableLayout& layout, const StagePlan& plan) {
  if (solution.status != lp::Status::Optimal) {
    throw SolverError("cannot recover a policy from a " + std::string(lp::to_string(solution.status)) + " LP");
  }
  if (solution.x.size() != layout.total()) throw InputError("LP solution does not match the variable layout");
  std::vector<std::vector<double>> cumulative(plan.stages());
  for (std::size_t i = 0; i < plan.stages(); ++i) {
    cumulative[i].resize(layout.stage_size(i));
    for (std::size_t q = 0; q < cumulative[i].size(); ++q) {
      double v = std::clamp(solution.x[layout.stage_begin(i) + q], 0.0, 1.0);
      if (i > 0) v = std::min(v, cumulative[i - 1][prefix_of(static_cast<CellIndex>(q), plan.cuts[i - 1])]);
      cumulative[i][q] = v;
    }
  }
  auto conditional = conditionals_from_cumulative(plan, cumulative);
  return Policy{plan, std::move(cumulative), std::move(conditional)};
}

OptimizeResult optimize(const JointDistribution& dist, const StagePlan& plan, const Budgets& budgets,
                        const FairnessSpec& fairness, const lp::SolverOptions& options) {
  auto assembled = assemble(dist, plan, budgets, fairness);
  auto solution = lp::solve(assembled.problem, options);
  if (solution.status != lp::Status::Optimal) {
    throw SolverError(std::string("LP ") + std::string(lp::to_string(solution.status)) + " for scope " +
                      std::string(to_string(fairness.scope)) + "/" + std::string(to_string(fairness.criterion)));
  }
  OptimizeResult result;
  result.utility = solution.objective;
  result.policy = recover_policy(solution, assembled.layout, plan);
  result.solution = std::move(solution);
  result.warnings = std::move(assembled.warnings);
  return result;
}

}  // namespace msfair
