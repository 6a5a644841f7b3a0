#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "msfair/lp.hpp"
#include "msfair/metrics.hpp"
#include "msfair/model.hpp"

namespace msfair {

/// Position of every cumulative pass variable in the LP: stage i owns a
/// contiguous block with one variable per realization of its first cuts[i]
/// features, and blocks follow stage order.
class VariableLayout {
 public:
  explicit VariableLayout(const StagePlan& plan);

  std::size_t stages() const { return cuts_.size(); }
  std::size_t stage_begin(std::size_t stage) const { return offsets_[stage]; }
  std::size_t stage_size(std::size_t stage) const { return offsets_[stage + 1] - offsets_[stage]; }
  std::size_t total() const { return offsets_.back(); }
  std::size_t prefix_length(std::size_t stage) const { return cuts_[stage]; }

  /// Variable index of stage `stage` for the prefix of `cell`.
  std::size_t index(std::size_t stage, CellIndex cell) const {
    return offsets_[stage] + prefix_of(cell, cuts_[stage]);
  }

 private:
  std::vector<std::size_t> cuts_;
  std::vector<std::size_t> offsets_;
};

/// Precision numerator over alpha_k; only final-stage variables carry weight.
std::vector<double> build_objective(const JointDistribution& dist, const StagePlan& plan, const Budgets& budgets,
                                    const VariableLayout& layout);

/// Expected pass fraction per stage: <= alpha_i before the last stage, = alpha_k at it.
std::vector<lp::Row> build_budget_rows(const JointDistribution& dist, const StagePlan& plan, const Budgets& budgets,
                                       const VariableLayout& layout);

/// cumulative(i, prefix) - cumulative(i-1, parent prefix) <= 0 for every stage i >= 2.
std::vector<lp::Row> build_coupling_rows(const VariableLayout& layout);

struct FairnessRows {
  std::vector<lp::Row> rows;
  std::vector<std::string> warnings;  // one per dropped constraint
};

/// Homogeneous equalities P(pass stage i | x_s=0) - P(pass stage i | x_s=1) = 0
/// (conditioned on y=1 as well for equal opportunity). Local scope constrains
/// every stage, global scope only the last one.
FairnessRows build_fairness_rows(const JointDistribution& dist, const StagePlan& plan, const FairnessSpec& fairness,
                                 const VariableLayout& layout);

struct AssembledProblem {
  lp::LpProblem problem;
  VariableLayout layout;
  std::vector<std::string> warnings;
};

AssembledProblem assemble(const JointDistribution& dist, const StagePlan& plan, const Budgets& budgets,
                          const FairnessSpec& fairness);

/// Clamps the LP vertex into [0,1] and derives per-stage conditionals.
/// Throws SolverError unless the solution is optimal.
Policy recover_policy(const lp::LpSolution& solution, const VariableLayout& layout, const StagePlan& plan);

struct OptimizeResult {
  double utility = 0.0;
  Policy policy;
  lp::LpSolution solution;
  std::vector<std::string> warnings;
};

/// Maximum precision under budgets and the requested fairness constraints.
/// Throws InputError for invalid instances and SolverError when the LP is not
/// solved to optimality.
OptimizeResult optimize(const JointDistribution& dist, const StagePlan& plan, const Budgets& budgets,
                        const FairnessSpec& fairness, const lp::SolverOptions& options = {});

/// Policy file: plan echo, per-stage prefix tables, utility, solver status,
/// warnings, and (when given) an evaluation report.
struct PolicyDocument {
  std::vector<std::string> features;  // names of the distribution the plan indexes
  Budgets budgets;
  FairnessSpec fairness;
  OptimizeResult result;
  std::optional<PolicyEvaluation> evaluation;
};

void write_policy(std::ostream& out, const PolicyDocument& doc);
void write_policy_file(const std::string& path, const PolicyDocument& doc);

struct LoadedPolicy {
  std::vector<std::string> features;
  Budgets budgets;
  FairnessSpec fairness;
  Policy policy;
  double utility = 0.0;
};

LoadedPolicy read_policy(std::istream& in);
LoadedPolicy read_policy_file(const std::string& path);

}  // namespace msfair
