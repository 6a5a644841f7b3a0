#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace msfair::lp {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Relation { LessEqual, Equal, GreaterEqual };

struct Row {
  std::vector<double> coefficients;
  Relation relation = Relation::LessEqual;
  double rhs = 0.0;
  std::string label;
};

/// maximize objective^T x  subject to rows and lower <= x <= upper.
struct LpProblem {
  std::vector<double> objective;
  std::vector<Row> rows;
  std::vector<double> lower;
  std::vector<double> upper;

  LpProblem() = default;
  /// n variables, zero objective, bounds [lo, hi].
  explicit LpProblem(std::size_t n, double lo = 0.0, double hi = kInfinity);

  std::size_t variables() const { return objective.size(); }
  void add_row(std::vector<double> coefficients, Relation relation, double rhs, std::string label = {});
};

enum class Status { Optimal, Infeasible, Unbounded };

std::string_view to_string(Status s);

struct LpSolution {
  Status status = Status::Infeasible;
  std::vector<double> x;
  double objective = 0.0;
  std::size_t iterations = 0;
};

struct SolverOptions {
  double pivot_tolerance = 1e-10;
  double feasibility_tolerance = 1e-9;
  double optimality_tolerance = 1e-9;
  // Degenerate pivots tolerated before switching to Bland's rule for the rest of the phase.
  std::size_t stall_threshold = 50;
  std::size_t refactor_interval = 64;
  std::size_t max_iterations = 200000;
};

/// Bounded-variable primal simplex on a dense tableau (two phases).
///
/// Deterministic: identical input gives identical output. Throws InputError on
/// dimension mismatches, NaN coefficients, or lower > upper; throws SolverError
/// if the iteration limit is hit.
LpSolution solve(const LpProblem& problem, const SolverOptions& options = {});

struct ResidualReport {
  double max_row_residual = 0.0;     // worst violation of any row relation
  double max_bound_violation = 0.0;  // worst violation of any variable bound
  double objective_mismatch = 0.0;   // |objective - c^T x|

  bool within(double tolerance) const {
    return max_row_residual <= tolerance && max_bound_violation <= tolerance && objective_mismatch <= tolerance;
  }
};

ResidualReport check_solution(const LpProblem& problem, const LpSolution& solution);

/// Plain-text dump: one line per objective/row/bound, tab-separated, suitable
/// for re-entry into an external solver.
void dump_lp(std::ostream& out, const LpProblem& problem);

}  // namespace msfair::lp
