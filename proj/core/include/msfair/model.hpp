#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msfair/errors.hpp"

namespace msfair {

using CellIndex = std::uint32_t;

// Dense enumeration of 2^d cells stays below ~8 MB per vector at this size.
inline constexpr std::size_t kMaxFeatures = 20;

inline constexpr double kMassTolerance = 1e-12;

/// Returns the value (0 or 1) of feature `feature` in `cell`.
inline int feature_bit(CellIndex cell, std::size_t feature) {
  return static_cast<int>((cell >> feature) & 1u);
}

/// Restricts a cell (or a longer prefix) to its first `length` features.
inline CellIndex prefix_of(CellIndex cell, std::size_t length) {
  return length >= 32 ? cell : (cell & ((CellIndex{1} << length) - 1));
}

/// Ordered list of binary features. Cells are packed little-endian:
/// feature 0 is the least significant bit of the cell index.
class FeatureSpace {
 public:
  FeatureSpace() = default;
  explicit FeatureSpace(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  std::size_t cell_count() const { return std::size_t{1} << names_.size(); }

  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const { return names_; }

  std::optional<std::size_t> find(std::string_view name) const;
  /// Like find, but throws InputError for unknown names.
  std::size_t index_of(std::string_view name) const;

  CellIndex cell_index(std::span<const std::uint8_t> bits) const;
  std::vector<std::uint8_t> decode(CellIndex cell) const;

  bool operator==(const FeatureSpace&) const = default;

 private:
  std::vector<std::string> names_;
};

/// Cell probabilities and per-cell P(y=1 | cell).
///
/// Construction only checks dimensions; probabilistic invariants are checked
/// by validate_distribution so that invalid inputs can be reported rather
/// than rejected.
class JointDistribution {
 public:
  JointDistribution() = default;
  JointDistribution(FeatureSpace space, std::vector<double> mass, std::vector<double> positive);

  const FeatureSpace& space() const { return space_; }
  std::span<const double> mass() const { return mass_; }
  std::span<const double> positive() const { return positive_; }
  double mass(CellIndex c) const { return mass_[c]; }
  double positive(CellIndex c) const { return positive_[c]; }
  std::size_t cell_count() const { return mass_.size(); }

  /// P(y = 1) by marginalization.
  double positive_rate() const;

 private:
  FeatureSpace space_;
  std::vector<double> mass_;
  std::vector<double> positive_;
};

/// Marginalizes onto `names` (in that order). Positives of merged cells are
/// mass-weighted averages; empty cells get positive 0.
JointDistribution project(const JointDistribution& dist, std::span<const std::string> names);

/// Where the sensitive feature becomes a decision input.
class SensitivePlacement {
 public:
  static SensitivePlacement at_stage(std::size_t stage);  // 1-based
  static SensitivePlacement unobserved() { return SensitivePlacement{0}; }

  bool observed() const { return stage_ != 0; }
  /// 1-based stage; only meaningful when observed().
  std::size_t stage() const { return stage_; }
  /// "stage1", "stage2", ... or "unobserved".
  std::string label() const;
  static SensitivePlacement parse(std::string_view text);

  auto operator<=>(const SensitivePlacement&) const = default;

 private:
  explicit SensitivePlacement(std::size_t stage) : stage_(stage) {}
  std::size_t stage_ = 0;
};

/// Stage i observes the first cuts[i-1] features of the distribution. Features
/// past cuts.back() are never observed by the policy (but still shape every
/// probability through the joint distribution).
struct StagePlan {
  std::vector<std::size_t> cuts;
  std::size_t sensitive = 0;
  SensitivePlacement placement = SensitivePlacement::unobserved();

  std::size_t stages() const { return cuts.size(); }
  std::size_t decision_features() const { return cuts.empty() ? 0 : cuts.back(); }
  std::size_t prefix_length(std::size_t stage) const { return cuts.at(stage); }  // 0-based stage
  std::size_t prefix_count(std::size_t stage) const { return std::size_t{1} << cuts.at(stage); }

  bool operator==(const StagePlan&) const = default;
};

/// Expected pass fractions per stage: upper bounds for all but the last stage,
/// which is an equality.
struct Budgets {
  std::vector<double> alphas;

  double final_alpha() const { return alphas.back(); }
  bool operator==(const Budgets&) const = default;
};

enum class Criterion { DemographicParity, EqualOpportunity };
enum class Scope { Unconstrained, Global, Local };

std::string_view to_string(Criterion c);
std::string_view to_string(Scope s);
Criterion parse_criterion(std::string_view text);  // "dp" | "eo"
Scope parse_scope(std::string_view text);          // "un" | "gf" | "lf"

struct FairnessSpec {
  Criterion criterion = Criterion::DemographicParity;
  Scope scope = Scope::Unconstrained;
};

/// A k-stage probabilistic selection policy.
///
/// cumulative[i][prefix] is the probability of passing stages 1..i+1 for a
/// candidate whose first cuts[i] features equal `prefix`; conditional[i][prefix]
/// is the probability of passing stage i+1 given stage i was passed.
struct Policy {
  StagePlan plan;
  std::vector<std::vector<double>> cumulative;
  std::vector<std::vector<double>> conditional;
};

/// Builds the conditional table from cumulative values: ratio to the parent
/// prefix's cumulative value, or 0 when that parent value is 0.
std::vector<std::vector<double>> conditionals_from_cumulative(const StagePlan& plan,
                                                              const std::vector<std::vector<double>>& cumulative);

/// Builds a Policy from per-stage conditional pass probabilities.
Policy policy_from_conditionals(const StagePlan& plan, std::vector<std::vector<double>> conditional);

/// The policy that passes every candidate at stage i with probability
/// alpha_i / alpha_{i-1}, independent of features.
Policy proportional_policy(const StagePlan& plan, const Budgets& budgets);

struct Violation {
  std::string message;
};

std::optional<Violation> validate_distribution(const JointDistribution& dist);
std::optional<Violation> validate_plan(const StagePlan& plan, const FeatureSpace& space);
std::optional<Violation> validate_budgets(const Budgets& budgets, std::size_t stages);
/// First violated invariant among distribution, plan and budgets.
std::optional<Violation> validate_instance(const JointDistribution& dist, const StagePlan& plan,
                                           const Budgets& budgets);
std::optional<Violation> validate_policy(const Policy& policy, double tolerance = 1e-12);

/// Throws InputError carrying the violation message, if any.
void require_valid_instance(const JointDistribution& dist, const StagePlan& plan, const Budgets& budgets);

/// P(x_s = a), or P(y = 1, x_s = a) when positives_only.
double group_mass(const JointDistribution& dist, std::size_t sensitive, int a, bool positives_only);

// Interchange format: {"features": [...], "mass": [...], "positive": [...]}.
JointDistribution read_distribution(std::istream& in);
JointDistribution read_distribution_file(const std::string& path);
void write_distribution(std::ostream& out, const JointDistribution& dist);
void write_distribution_file(const std::string& path, const JointDistribution& dist);

}  // namespace msfair
