#pragma once

#include <optional>
#include <vector>

#include "msfair/lp.hpp"

namespace msfair::testing {

struct VertexOracleResult {
  bool feasible = false;
  double objective = 0.0;
  std::vector<double> x;
  std::size_t vertices = 0;  // feasible basic points visited
};

/// Brute-force LP oracle: every choice of n active hyperplanes (all equality
/// rows plus n - m_eq among inequality rows and variable bounds) is solved
/// with a full-pivot LU; feasible points are compared by objective. Needs
/// finite bounds and at most `max_variables` variables.
VertexOracleResult enumerate_vertices(const lp::LpProblem& problem, double tolerance = 1e-9,
                                      std::size_t max_variables = 8);

}  // namespace msfair::testing
