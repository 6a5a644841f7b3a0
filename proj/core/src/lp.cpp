#include "msfair/lp.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "msfair/errors.hpp"

namespace msfair::lp {

LpProblem::LpProblem(std::size_t n, double lo, double hi) : objective(n, 0.0), lower(n, lo), upper(n, hi) {}

void LpProblem::add_row(std::vector<double> coefficients, Relation relation, double rhs, std::string label) {
  rows.push_back(Row{std::move(coefficients), relation, rhs, std::move(label)});
}

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Optimal:
      return "optimal";
    case Status::Infeasible:
      return "infeasible";
    case Status::Unbounded:
      return "unbounded";
  }
  return "?";
}

namespace {

enum class VarState : unsigned char { Basic, AtLower, AtUpper, FreeZero };

void validate(const LpProblem& p) {
  const std::size_t n = p.variables();
  if (p.lower.size() != n || p.upper.size() != n) throw InputError("LP bound vectors do not match variable count");
  for (std::size_t j = 0; j < n; ++j) {
    if (std::isnan(p.objective[j]) || std::isnan(p.lower[j]) || std::isnan(p.upper[j])) {
      throw InputError("LP contains NaN in objective or bounds");
    }
    if (p.lower[j] > p.upper[j]) throw InputError("LP variable " + std::to_string(j) + " has lower > upper");
    if (p.lower[j] == kInfinity || p.upper[j] == -kInfinity) throw InputError("LP bound is infinite on the wrong side");
  }
  for (std::size_t r = 0; r < p.rows.size(); ++r) {
    const auto& row = p.rows[r];
    if (row.coefficients.size() != n) {
      throw InputError("LP row " + std::to_string(r) + " has " + std::to_string(row.coefficients.size()) +
                       " coefficients, expected " + std::to_string(n));
    }
    if (!std::isfinite(row.rhs)) throw InputError("LP row " + std::to_string(r) + " has a non-finite rhs");
    for (double v : row.coefficients) {
      if (!std::isfinite(v)) throw InputError("LP row " + std::to_string(r) + " has a non-finite coefficient");
    }
  }
}

// Columns are laid out as [structural | one slack per row | artificials].
// Row r reads  a_r x + s_r (+ sigma * art_r) = b_r  with the slack bounds
// encoding the relation.
class Simplex {
 public:
  Simplex(const LpProblem& problem, const SolverOptions& options)
      : problem_(problem), opt_(options), n_(problem.variables()), m_(problem.rows.size()) {
    build();
  }

  LpSolution run() {
    LpSolution result;
    if (artificials_ > 0) {
      set_phase_one_costs();
      const auto status = iterate();
      (void)status;  // phase one is bounded below by zero
      double infeasibility = 0.0;
      for (std::size_t r = 0; r < m_; ++r) {
        if (is_artificial(basis_[r])) infeasibility += std::max(0.0, beta_[r]);
      }
      if (infeasibility > opt_.feasibility_tolerance) {
        result.status = Status::Infeasible;
        result.iterations = iterations_;
        return result;
      }
      retire_artificials();
    }
    set_phase_two_costs();
    const auto status = iterate();
    reinvert();
    result.iterations = iterations_;
    result.x.assign(n_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) result.x[j] = value_[j];
    for (std::size_t r = 0; r < m_; ++r) {
      if (basis_[r] < n_) result.x[basis_[r]] = beta_[r];
    }
    result.status = status;
    double obj = 0.0;
    for (std::size_t j = 0; j < n_; ++j) obj += problem_.objective[j] * result.x[j];
    result.objective = obj;
    return result;
  }

 private:
  const LpProblem& problem_;
  const SolverOptions& opt_;
  std::size_t n_;
  std::size_t m_;
  std::size_t cols_ = 0;
  std::size_t artificials_ = 0;

  std::vector<double> a_;  // original constraint matrix, m x cols, row-major
  std::vector<double> b_;
  std::vector<double> lo_, hi_, cost_;
  std::vector<double> t_;     // B^-1 A
  std::vector<double> beta_;  // values of basic variables, per row
  std::vector<std::size_t> basis_;
  std::vector<VarState> state_;
  std::vector<double> value_;  // current value of nonbasic columns

  std::size_t iterations_ = 0;
  std::size_t pivots_since_refactor_ = 0;

  double& t(std::size_t r, std::size_t c) { return t_[r * cols_ + c]; }
  double& a(std::size_t r, std::size_t c) { return a_[r * cols_ + c]; }
  bool is_artificial(std::size_t c) const { return c >= n_ + m_; }
  bool is_fixed(std::size_t c) const { return lo_[c] == hi_[c]; }

  void build() {
    // Place structurals at a finite bound, then decide per row whether the
    // slack can start basic or an artificial is needed.
    std::vector<double> x(n_);
    std::vector<VarState> xs(n_);
    for (std::size_t j = 0; j < n_; ++j) {
      if (std::isfinite(problem_.lower[j])) {
        x[j] = problem_.lower[j];
        xs[j] = VarState::AtLower;
      } else if (std::isfinite(problem_.upper[j])) {
        x[j] = problem_.upper[j];
        xs[j] = VarState::AtUpper;
      } else {
        x[j] = 0.0;
        xs[j] = VarState::FreeZero;
      }
    }
    std::vector<double> residual(m_);
    std::vector<double> slack_lo(m_), slack_hi(m_);
    std::vector<int> needs_art(m_, 0);
    for (std::size_t r = 0; r < m_; ++r) {
      const auto& row = problem_.rows[r];
      double ax = 0.0;
      for (std::size_t j = 0; j < n_; ++j) ax += row.coefficients[j] * x[j];
      residual[r] = row.rhs - ax;
      switch (row.relation) {
        case Relation::LessEqual:
          slack_lo[r] = 0.0;
          slack_hi[r] = kInfinity;
          break;
        case Relation::GreaterEqual:
          slack_lo[r] = -kInfinity;
          slack_hi[r] = 0.0;
          break;
        case Relation::Equal:
          slack_lo[r] = 0.0;
          slack_hi[r] = 0.0;
          break;
      }
      const bool fits = residual[r] >= slack_lo[r] && residual[r] <= slack_hi[r];
      if (!fits) {
        needs_art[r] = residual[r] > 0.0 ? 1 : -1;
        ++artificials_;
      }
    }

    cols_ = n_ + m_ + artificials_;
    a_.assign(m_ * cols_, 0.0);
    b_.resize(m_);
    lo_.resize(cols_);
    hi_.resize(cols_);
    value_.assign(cols_, 0.0);
    state_.assign(cols_, VarState::AtLower);
    basis_.assign(m_, 0);

    for (std::size_t j = 0; j < n_; ++j) {
      lo_[j] = problem_.lower[j];
      hi_[j] = problem_.upper[j];
      value_[j] = x[j];
      state_[j] = xs[j];
    }
    std::size_t next_art = n_ + m_;
    for (std::size_t r = 0; r < m_; ++r) {
      const auto& row = problem_.rows[r];
      for (std::size_t j = 0; j < n_; ++j) a(r, j) = row.coefficients[j];
      b_[r] = row.rhs;
      const std::size_t s = n_ + r;
      a(r, s) = 1.0;
      lo_[s] = slack_lo[r];
      hi_[s] = slack_hi[r];
      if (needs_art[r] == 0) {
        basis_[r] = s;
        state_[s] = VarState::Basic;
      } else {
        // Slack sits at its bound nearest the residual (0 for every relation).
        value_[s] = 0.0;
        state_[s] = std::isfinite(slack_lo[r]) ? VarState::AtLower : VarState::AtUpper;
        const std::size_t art = next_art++;
        a(r, art) = static_cast<double>(needs_art[r]);
        lo_[art] = 0.0;
        hi_[art] = kInfinity;
        basis_[r] = art;
        state_[art] = VarState::Basic;
      }
    }
    cost_.assign(cols_, 0.0);
    reinvert();
  }

  // Rebuilds B^-1 A and the basic values from the original data.
  void reinvert() {
    t_ = a_;
    std::vector<double> rhs = b_;
    std::vector<std::size_t> new_basis(m_, cols_);
    std::vector<char> used(m_, 0);
    for (std::size_t k = 0; k < m_; ++k) {
      const std::size_t c = basis_[k];
      std::size_t p = m_;
      double best = 0.0;
      for (std::size_t r = 0; r < m_; ++r) {
        if (used[r]) continue;
        const double v = std::abs(t(r, c));
        if (v > best) {
          best = v;
          p = r;
        }
      }
      if (p == m_ || best < 1e-14) throw SolverError("simplex basis became singular during refactorization");
      used[p] = 1;
      new_basis[p] = c;
      eliminate(p, c, rhs);
    }
    basis_ = std::move(new_basis);
    beta_.assign(m_, 0.0);
    for (std::size_t r = 0; r < m_; ++r) {
      double v = rhs[r];
      const double* row = &t_[r * cols_];
      for (std::size_t j = 0; j < cols_; ++j) {
        if (state_[j] != VarState::Basic && value_[j] != 0.0) v -= row[j] * value_[j];
      }
      beta_[r] = v;
    }
    pivots_since_refactor_ = 0;
  }

  // Gauss-Jordan step making column c a unit vector with its 1 in row p.
  void eliminate(std::size_t p, std::size_t c, std::vector<double>& rhs) {
    double* prow = &t_[p * cols_];
    const double inv = 1.0 / prow[c];
    for (std::size_t j = 0; j < cols_; ++j) prow[j] *= inv;
    prow[c] = 1.0;
    rhs[p] *= inv;
    for (std::size_t r = 0; r < m_; ++r) {
      if (r == p) continue;
      double* row = &t_[r * cols_];
      const double f = row[c];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < cols_; ++j) row[j] -= f * prow[j];
      row[c] = 0.0;
      rhs[r] -= f * rhs[p];
    }
  }

  void pivot(std::size_t p, std::size_t c) {
    double* prow = &t_[p * cols_];
    const double inv = 1.0 / prow[c];
    for (std::size_t j = 0; j < cols_; ++j) prow[j] *= inv;
    prow[c] = 1.0;
    for (std::size_t r = 0; r < m_; ++r) {
      if (r == p) continue;
      double* row = &t_[r * cols_];
      const double f = row[c];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < cols_; ++j) row[j] -= f * prow[j];
      row[c] = 0.0;
    }
  }

  void set_phase_one_costs() {
    std::fill(cost_.begin(), cost_.end(), 0.0);
    for (std::size_t c = n_ + m_; c < cols_; ++c) cost_[c] = -1.0;
  }

  void set_phase_two_costs() {
    std::fill(cost_.begin(), cost_.end(), 0.0);
    for (std::size_t j = 0; j < n_; ++j) cost_[j] = problem_.objective[j];
  }

  // Fixes artificials at zero and pivots basic ones out where the row allows.
  void retire_artificials() {
    for (std::size_t c = n_ + m_; c < cols_; ++c) {
      hi_[c] = 0.0;
      if (state_[c] != VarState::Basic) {
        state_[c] = VarState::AtLower;
        value_[c] = 0.0;
      }
    }
    for (std::size_t p = 0; p < m_; ++p) {
      const std::size_t art = basis_[p];
      if (!is_artificial(art)) continue;
      std::size_t best_col = cols_;
      double best = opt_.pivot_tolerance;
      for (std::size_t j = 0; j < n_ + m_; ++j) {
        if (state_[j] == VarState::Basic) continue;
        const double v = std::abs(t(p, j));
        if (v > best) {
          best = v;
          best_col = j;
        }
      }
      if (best_col == cols_) continue;  // redundant row; the artificial stays basic at zero
      const double entering_value = value_[best_col];
      pivot(p, best_col);
      basis_[p] = best_col;
      state_[best_col] = VarState::Basic;
      beta_[p] = entering_value;
      state_[art] = VarState::AtLower;
      value_[art] = 0.0;
      ++pivots_since_refactor_;
    }
    reinvert();
  }

  Status iterate() {
    bool bland = false;
    std::size_t stalls = 0;
    std::vector<double> reduced(cols_);
    const std::size_t refactor_every = std::max(opt_.refactor_interval, m_);
    for (;;) {
      if (iterations_ >= opt_.max_iterations) throw SolverError("simplex iteration limit reached");
      if (pivots_since_refactor_ >= refactor_every) reinvert();

      reduced = cost_;
      for (std::size_t r = 0; r < m_; ++r) {
        const double cb = cost_[basis_[r]];
        if (cb == 0.0) continue;
        const double* row = &t_[r * cols_];
        for (std::size_t j = 0; j < cols_; ++j) reduced[j] -= cb * row[j];
      }

      std::size_t entering = cols_;
      double best = 0.0;
      int direction = 0;
      for (std::size_t j = 0; j < cols_; ++j) {
        if (state_[j] == VarState::Basic || is_fixed(j)) continue;
        const double d = reduced[j];
        int dir = 0;
        if (state_[j] == VarState::AtLower && d > opt_.optimality_tolerance) dir = 1;
        else if (state_[j] == VarState::AtUpper && d < -opt_.optimality_tolerance) dir = -1;
        else if (state_[j] == VarState::FreeZero && std::abs(d) > opt_.optimality_tolerance) dir = d > 0 ? 1 : -1;
        if (dir == 0) continue;
        if (bland) {
          entering = j;
          direction = dir;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          entering = j;
          direction = dir;
        }
      }
      if (entering == cols_) return Status::Optimal;

      // Ratio test.
      double theta = kInfinity;
      bool flip = false;
      if (std::isfinite(lo_[entering]) && std::isfinite(hi_[entering])) {
        theta = hi_[entering] - lo_[entering];
        flip = true;
      }
      std::size_t leave_row = m_;
      double leave_alpha = 0.0;
      for (std::size_t r = 0; r < m_; ++r) {
        const double alpha = t(r, entering) * direction;
        if (std::abs(alpha) <= opt_.pivot_tolerance) continue;
        const std::size_t c = basis_[r];
        double ratio;
        if (alpha > 0.0) {
          if (!std::isfinite(lo_[c])) continue;
          ratio = (beta_[r] - lo_[c]) / alpha;
        } else {
          if (!std::isfinite(hi_[c])) continue;
          ratio = (hi_[c] - beta_[r]) / -alpha;
        }
        ratio = std::max(ratio, 0.0);
        // A bound flip wins ties against pivots; among tied rows Bland picks the
        // smallest basic index, Dantzig the largest pivot magnitude.
        bool take = false;
        if (ratio < theta - 1e-12) {
          take = true;
        } else if (leave_row != m_ && ratio <= theta + 1e-12) {
          take = bland ? c < basis_[leave_row] : std::abs(alpha) > std::abs(leave_alpha);
        }
        if (take) {
          theta = ratio;
          leave_row = r;
          leave_alpha = alpha;
          flip = false;
        }
      }

      if (!flip && leave_row == m_) return Status::Unbounded;

      ++iterations_;
      if (theta <= 1e-12) {
        if (++stalls > opt_.stall_threshold) bland = true;
      }

      const double step = theta * direction;
      if (step != 0.0) {
        for (std::size_t r = 0; r < m_; ++r) beta_[r] -= t(r, entering) * step;
      }

      if (flip) {
        if (direction > 0) {
          value_[entering] = hi_[entering];
          state_[entering] = VarState::AtUpper;
        } else {
          value_[entering] = lo_[entering];
          state_[entering] = VarState::AtLower;
        }
        continue;
      }

      const std::size_t leaving = basis_[leave_row];
      const double entering_value = value_[entering] + step;
      if (leave_alpha > 0.0) {
        value_[leaving] = lo_[leaving];
        state_[leaving] = VarState::AtLower;
      } else {
        value_[leaving] = hi_[leaving];
        state_[leaving] = VarState::AtUpper;
      }
      pivot(leave_row, entering);
      basis_[leave_row] = entering;
      state_[entering] = VarState::Basic;
      beta_[leave_row] = entering_value;
      ++pivots_since_refactor_;
    }
  }
};

}  // namespace

LpSolution solve(const LpProblem& problem, const SolverOptions& options) {
  validate(problem);
  Simplex simplex(problem, options);
  return simplex.run();
}

ResidualReport check_solution(const LpProblem& problem, const LpSolution& solution) {
  ResidualReport report;
  const std::size_t n = problem.variables();
  if (solution.x.size() != n) {
    report.max_row_residual = kInfinity;
    report.max_bound_violation = kInfinity;
    report.objective_mismatch = kInfinity;
    return report;
  }
  for (const auto& row : problem.rows) {
    double ax = 0.0;
    for (std::size_t j = 0; j < n; ++j) ax += row.coefficients[j] * solution.x[j];
    double violation = 0.0;
    switch (row.relation) {
      case Relation::LessEqual:
        violation = std::max(0.0, ax - row.rhs);
        break;
      case Relation::GreaterEqual:
        violation = std::max(0.0, row.rhs - ax);
        break;
      case Relation::Equal:
        violation = std::abs(ax - row.rhs);
        break;
    }
    report.max_row_residual = std::max(report.max_row_residual, violation);
  }
  double obj = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double v = solution.x[j];
    report.max_bound_violation =
        std::max({report.max_bound_violation, problem.lower[j] - v, v - problem.upper[j], 0.0});
    obj += problem.objective[j] * v;
  }
  report.objective_mismatch = std::abs(obj - solution.objective);
  return report;
}

void dump_lp(std::ostream& out, const LpProblem& problem) {
  const auto precision = out.precision(17);
  out << "# variables\t" << problem.variables() << "\n# rows\t" << problem.rows.size() << '\n';
  out << "max";
  for (double c : problem.objective) out << '\t' << c;
  out << '\n';
  for (std::size_t r = 0; r < problem.rows.size(); ++r) {
    const auto& row = problem.rows[r];
    out << "row\t" << (row.label.empty() ? "r" + std::to_string(r) : row.label);
    for (double v : row.coefficients) out << '\t' << v;
    const char* rel = row.relation == Relation::LessEqual ? "<=" : row.relation == Relation::Equal ? "=" : ">=";
    out << '\t' << rel << '\t' << row.rhs << '\n';
  }
  out << "lower";
  for (double v : problem.lower) out << '\t' << v;
  out << "\nupper";
  for (double v : problem.upper) out << '\t' << v;
  out << '\n';
  out.precision(precision);
}

}  // namespace msfair::lp
