#include "msfair/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace msfair {

namespace {

std::string describe(double v) {
  std::ostringstream os;
  os.precision(15);
  os << v;
  return os.str();
}

}  // namespace

FeatureSpace::FeatureSpace(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty() || names_.size() > kMaxFeatures) {
    throw InputError("feature count must be in [1, " + std::to_string(kMaxFeatures) + "], got " +
                     std::to_string(names_.size()));
  }
  std::unordered_set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw InputError("feature names must be non-empty");
    if (!seen.insert(n).second) throw InputError("duplicate feature name '" + n + "'");
  }
}

std::optional<std::size_t> FeatureSpace::find(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

std::size_t FeatureSpace::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw InputError("unknown feature '" + std::string(name) + "'");
}

CellIndex FeatureSpace::cell_index(std::span<const std::uint8_t> bits) const {
  if (bits.size() != names_.size()) {
    throw InputError("assignment has " + std::to_string(bits.size()) + " bits, feature space has " +
                     std::to_string(names_.size()));
  }
  CellIndex cell = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] > 1) throw InputError("assignment bits must be 0 or 1");
    cell |= static_cast<CellIndex>(bits[i]) << i;
  }
  return cell;
}

std::vector<std::uint8_t> FeatureSpace::decode(CellIndex cell) const {
  if (cell >= cell_count()) throw InputError("cell index out of range");
  std::vector<std::uint8_t> bits(names_.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = static_cast<std::uint8_t>(feature_bit(cell, i));
  return bits;
}

JointDistribution::JointDistribution(FeatureSpace space, std::vector<double> mass, std::vector<double> positive)
    : space_(std::move(space)), mass_(std::move(mass)), positive_(std::move(positive)) {
  const auto cells = space_.cell_count();
  if (mass_.size() != cells || positive_.size() != cells) {
    throw InputError("distribution over " + std::to_string(space_.size()) + " features needs " +
                     std::to_string(cells) + " cells, got mass=" + std::to_string(mass_.size()) +
                     " positive=" + std::to_string(positive_.size()));
  }
}

double JointDistribution::positive_rate() const {
  double total = 0.0;
  for (std::size_t c = 0; c < mass_.size(); ++c) total += mass_[c] * positive_[c];
  return total;
}

JointDistribution project(const JointDistribution& dist, std::span<const std::string> names) {
  FeatureSpace target{std::vector<std::string>(names.begin(), names.end())};
  std::vector<std::size_t> source(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) source[i] = dist.space().index_of(target.name(i));

  std::vector<double> mass(target.cell_count(), 0.0);
  std::vector<double> pos_mass(target.cell_count(), 0.0);
  for (CellIndex c = 0; c < dist.cell_count(); ++c) {
    CellIndex t = 0;
    for (std::size_t i = 0; i < source.size(); ++i) t |= static_cast<CellIndex>(feature_bit(c, source[i])) << i;
    mass[t] += dist.mass(c);
    pos_mass[t] += dist.mass(c) * dist.positive(c);
  }
  std::vector<double> positive(mass.size(), 0.0);
  for (std::size_t t = 0; t < mass.size(); ++t) {
    if (mass[t] > 0.0) positive[t] = std::clamp(pos_mass[t] / mass[t], 0.0, 1.0);
  }
  return JointDistribution(std::move(target), std::move(mass), std::move(positive));
}

SensitivePlacement SensitivePlacement::at_stage(std::size_t stage) {
  if (stage == 0) throw InputError("sensitive placement stages are 1-based");
  return SensitivePlacement{stage};
}

std::string SensitivePlacement::label() const {
  return observed() ? "stage" + std::to_string(stage_) : std::string("unobserved");
}

SensitivePlacement SensitivePlacement::parse(std::string_view text) {
  if (text == "unobserved" || text == "none") return unobserved();
  if (text.starts_with("stage")) text.remove_prefix(5);
  std::size_t stage = 0;
  for (char ch : text) {
    if (ch < '0' || ch > '9') throw InputError("bad sensitive placement '" + std::string(text) + "'");
    stage = stage * 10 + static_cast<std::size_t>(ch - '0');
  }
  return at_stage(stage);
}

std::string_view to_string(Criterion c) {
  return c == Criterion::DemographicParity ? "dp" : "eo";
}

std::string_view to_string(Scope s) {
  switch (s) {
    case Scope::Unconstrained:
      return "un";
    case Scope::Global:
      return "gf";
    case Scope::Local:
      return "lf";
  }
  return "?";
}

Criterion parse_criterion(std::string_view text) {
  if (text == "dp") return Criterion::DemographicParity;
  if (text == "eo") return Criterion::EqualOpportunity;
  throw InputError("unknown criterion '" + std::string(text) + "' (expected dp|eo)");
}

Scope parse_scope(std::string_view text) {
  if (text == "un") return Scope::Unconstrained;
  if (text == "gf") return Scope::Global;
  if (text == "lf") return Scope::Local;
  throw InputError("unknown scope '" + std::string(text) + "' (expected un|gf|lf)");
}

std::vector<std::vector<double>> conditionals_from_cumulative(const StagePlan& plan,
                                                              const std::vector<std::vector<double>>& cumulative) {
  std::vector<std::vector<double>> conditional(cumulative.size());
  for (std::size_t i = 0; i < cumulative.size(); ++i) {
    conditional[i].resize(cumulative[i].size());
    for (std::size_t q = 0; q < cumulative[i].size(); ++q) {
      if (i == 0) {
        conditional[i][q] = cumulative[i][q];
        continue;
      }
      const double parent = cumulative[i - 1][prefix_of(static_cast<CellIndex>(q), plan.cuts[i - 1])];
      conditional[i][q] = parent != 0.0 ? std::clamp(cumulative[i][q] / parent, 0.0, 1.0) : 0.0;
    }
  }
  return conditional;
}

Policy policy_from_conditionals(const StagePlan& plan, std::vector<std::vector<double>> conditional) {
  if (conditional.size() != plan.stages()) throw InputError("policy stage count does not match plan");
  std::vector<std::vector<double>> cumulative(conditional.size());
  for (std::size_t i = 0; i < conditional.size(); ++i) {
    if (conditional[i].size() != plan.prefix_count(i)) {
      throw InputError("stage " + std::to_string(i + 1) + " needs " + std::to_string(plan.prefix_count(i)) +
                       " entries");
    }
    cumulative[i].resize(conditional[i].size());
    for (std::size_t q = 0; q < conditional[i].size(); ++q) {
      const double parent =
          i == 0 ? 1.0 : cumulative[i - 1][prefix_of(static_cast<CellIndex>(q), plan.cuts[i - 1])];
      cumulative[i][q] = parent * conditional[i][q];
    }
  }
  return Policy{plan, std::move(cumulative), std::move(conditional)};
}

Policy proportional_policy(const StagePlan& plan, const Budgets& budgets) {
  std::vector<std::vector<double>> conditional(plan.stages());
  for (std::size_t i = 0; i < plan.stages(); ++i) {
    const double rate = i == 0 ? budgets.alphas[0] : budgets.alphas[i] / budgets.alphas[i - 1];
    conditional[i].assign(plan.prefix_count(i), rate);
  }
  return policy_from_conditionals(plan, std::move(conditional));
}

std::optional<Violation> validate_distribution(const JointDistribution& dist) {
  double total = 0.0;
  for (CellIndex c = 0; c < dist.cell_count(); ++c) {
    const double m = dist.mass(c);
    const double p = dist.positive(c);
    if (!std::isfinite(m) || m < 0.0) return Violation{"mass >= 0 fails at cell " + std::to_string(c)};
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      return Violation{"positive in [0,1] fails at cell " + std::to_string(c)};
    }
    if (m == 0.0 && p != 0.0) return Violation{"zero-mass cell " + std::to_string(c) + " must have positive 0"};
    total += m;
  }
  if (std::abs(total - 1.0) > kMassTolerance) return Violation{"mass sums to 1 fails (sum=" + describe(total) + ")"};
  return std::nullopt;
}

std::optional<Violation> validate_plan(const StagePlan& plan, const FeatureSpace& space) {
  if (plan.cuts.empty()) return Violation{"k >= 1 fails (no stages)"};
  if (plan.cuts.front() == 0) return Violation{"stage 1 must observe at least one feature"};
  for (std::size_t i = 1; i < plan.cuts.size(); ++i) {
    if (plan.cuts[i] <= plan.cuts[i - 1]) return Violation{"stage cuts strictly increasing fails"};
  }
  if (plan.cuts.back() > space.size()) return Violation{"stage cuts exceed the feature count"};
  if (plan.sensitive >= space.size()) return Violation{"sensitive feature index out of range"};
  if (plan.placement.observed()) {
    const std::size_t stage = plan.placement.stage();
    if (stage > plan.stages()) return Violation{"sensitive placement names a stage past k"};
    const std::size_t first = stage == 1 ? 0 : plan.cuts[stage - 2];
    if (plan.sensitive < first || plan.sensitive >= plan.cuts[stage - 1]) {
      return Violation{"sensitive feature is not first revealed at " + plan.placement.label()};
    }
  } else if (plan.sensitive < plan.decision_features()) {
    return Violation{"unobserved sensitive feature must not be a decision feature"};
  }
  return std::nullopt;
}

std::optional<Violation> validate_budgets(const Budgets& budgets, std::size_t stages) {
  const auto& a = budgets.alphas;
  if (a.size() != stages) {
    return Violation{"budget count " + std::to_string(a.size()) + " != stage count " + std::to_string(stages)};
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i])) return Violation{"alpha_" + std::to_string(i + 1) + " is not finite"};
  }
  if (a.front() > 1.0) return Violation{"1 >= alpha_1 fails"};
  for (std::size_t i = 1; i < a.size(); ++i) {
    if (a[i] > a[i - 1]) {
      return Violation{"alpha_" + std::to_string(i) + " >= alpha_" + std::to_string(i + 1) + " fails"};
    }
  }
  if (a.back() <= 0.0) return Violation{"alpha_k > 0 fails"};
  return std::nullopt;
}

std::optional<Violation> validate_instance(const JointDistribution& dist, const StagePlan& plan,
                                           const Budgets& budgets) {
  if (auto v = validate_distribution(dist)) return v;
  if (auto v = validate_plan(plan, dist.space())) return v;
  return validate_budgets(budgets, plan.stages());
}

std::optional<Violation> validate_policy(const Policy& policy, double tolerance) {
  const auto& plan = policy.plan;
  if (policy.cumulative.size() != plan.stages() || policy.conditional.size() != plan.stages()) {
    return Violation{"policy stage count does not match plan"};
  }
  for (std::size_t i = 0; i < plan.stages(); ++i) {
    if (policy.cumulative[i].size() != plan.prefix_count(i) || policy.conditional[i].size() != plan.prefix_count(i)) {
      return Violation{"policy table size mismatch at stage " + std::to_string(i + 1)};
    }
    for (std::size_t q = 0; q < plan.prefix_count(i); ++q) {
      const double cum = policy.cumulative[i][q];
      const double cond = policy.conditional[i][q];
      if (!(cum >= -tolerance && cum <= 1.0 + tolerance)) return Violation{"cumulative in [0,1] fails"};
      if (!(cond >= -tolerance && cond <= 1.0 + tolerance)) return Violation{"conditional in [0,1] fails"};
      if (i == 0) continue;
      const double parent = policy.cumulative[i - 1][prefix_of(static_cast<CellIndex>(q), plan.cuts[i - 1])];
      if (cum > parent + tolerance) {
        return Violation{"cumulative exceeds parent at stage " + std::to_string(i + 1)};
      }
      if (parent != 0.0 && std::abs(parent * cond - cum) > tolerance) {
        return Violation{"conditional does not reproduce cumulative at stage " + std::to_string(i + 1)};
      }
    }
  }
  return std::nullopt;
}

void require_valid_instance(const JointDistribution& dist, const StagePlan& plan, const Budgets& budgets) {
  if (auto v = validate_instance(dist, plan, budgets)) throw InputError("invalid instance: " + v->message);
}

double group_mass(const JointDistribution& dist, std::size_t sensitive, int a, bool positives_only) {
  if (sensitive >= dist.space().size()) throw InputError("sensitive feature index out of range");
  double total = 0.0;
  for (CellIndex c = 0; c < dist.cell_count(); ++c) {
    if (feature_bit(c, sensitive) != a) continue;
    total += positives_only ? dist.mass(c) * dist.positive(c) : dist.mass(c);
  }
  return total;
}

}  // namespace msfair
