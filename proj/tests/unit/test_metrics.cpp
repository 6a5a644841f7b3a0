#include <gtest/gtest.h>

#include <random>

#include "data_fixture.hpp"
#include "msfair/metrics.hpp"
#include "msfair/montecarlo.hpp"
#include "msfair/policy.hpp"
#include "random_instances.hpp"
#include "rate_oracle.hpp"

namespace msfair {
namespace {

TEST(Evaluate, ProportionalPolicyHasBaseRatePrecision) {
  std::mt19937_64 gen(1);
  testing::InstanceShape shape;
  shape.max_stages = 3;
  shape.max_observed = 5;
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = testing::random_instance(gen, shape);
    const auto eval = evaluate(proportional_policy(inst.plan, inst.budgets), inst.dist, inst.plan, inst.budgets);
    EXPECT_NEAR(eval.precision, inst.dist.positive_rate(), 1e-12);
    for (std::size_t i = 0; i < inst.plan.stages(); ++i) EXPECT_NEAR(eval.selected[i], inst.budgets.alphas[i], 1e-12);
  }
}

TEST(Evaluate, AllPassPolicy) {
  std::mt19937_64 gen(2);
  const auto dist = testing::random_distribution(gen, {"a", "b", "c"});
  StagePlan plan{{1, 2}, 2, SensitivePlacement::unobserved()};
  const auto policy = policy_from_conditionals(plan, {{1.0, 1.0}, {1.0, 1.0, 1.0, 1.0}});
  const auto eval = evaluate(policy, dist, plan, Budgets{{1.0, 1.0}});
  EXPECT_NEAR(eval.precision, dist.positive_rate(), 1e-12);
  EXPECT_NEAR(eval.selected[1], 1.0, 1e-12);
}

TEST(Evaluate, NothingSelectedGivesZeroPrecision) {
  std::mt19937_64 gen(3);
  const auto dist = testing::random_distribution(gen, {"a", "b"});
  StagePlan plan{{1, 2}, 1, SensitivePlacement::at_stage(2)};
  const auto policy = policy_from_conditionals(plan, {{0.0, 0.0}, {1.0, 1.0, 1.0, 1.0}});
  const auto eval = evaluate(policy, dist, plan, Budgets{{0.5, 0.3}});
  EXPECT_EQ(eval.precision, 0.0);
  EXPECT_EQ(eval.selected[1], 0.0);
  EXPECT_FALSE(eval.dp_survivor_rate[1][0].has_value());
}

TEST(Evaluate, RatesMatchCumulativeOracle) {
  std::mt19937_64 gen(4);
  testing::InstanceShape shape;
  shape.max_stages = 3;
  shape.max_observed = 5;
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = testing::random_instance(gen, shape);
    std::vector<std::vector<double>> cond;
    for (std::size_t i = 0; i < inst.plan.stages(); ++i) {
      std::vector<double> row(inst.plan.prefix_count(i));
      for (auto& v : row) v = uniform01(gen);
      cond.push_back(row);
    }
    const auto policy = policy_from_conditionals(inst.plan, cond);
    const auto eval = evaluate(policy, inst.dist, inst.plan, inst.budgets);
    for (std::size_t i = 0; i < inst.plan.stages(); ++i) {
      for (bool eo : {false, true}) {
        const auto r = testing::stage_rates(policy, inst.dist, inst.plan, i, eo);
        const auto& rate = eo ? eval.eo_rate : eval.dp_rate;
        const auto& gap = eo ? eval.eo_gap : eval.dp_gap;
        EXPECT_NEAR(rate[i][0], r.pass[0], 1e-12);
        EXPECT_NEAR(rate[i][1], r.pass[1], 1e-12);
        EXPECT_NEAR(gap[i], std::abs(r.pass[0] - r.pass[1]), 1e-12);
        EXPECT_GE(gap[i], 0.0);
      }
    }
    EXPECT_GE(eval.precision, 0.0);
    EXPECT_LE(eval.precision, 1.0);
  }
}

TEST(Evaluate, MismatchedBudgetsThrow) {
  StagePlan plan{{1}, 0, SensitivePlacement::at_stage(1)};
  JointDistribution dist(FeatureSpace({"x"}), {0.5, 0.5}, {0.2, 0.8});
  const auto policy = policy_from_conditionals(plan, {{0.5, 0.5}});
  EXPECT_THROW(evaluate(policy, dist, plan, Budgets{{0.5, 0.3}}), InputError);
}

TEST(Polf, Basics) {
  EXPECT_EQ(polf(0.5, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(polf(0.6, 0.5), 1.2);
  EXPECT_THROW(polf(0.5, 0.0), InputError);
  EXPECT_THROW(polf(0.4, 0.5), InvariantError);
  EXPECT_NO_THROW(polf(0.5 - 1e-12, 0.5));
}

TEST(Polf, SingleStageIsOne) {
  std::mt19937_64 gen(5);
  testing::InstanceShape shape;
  shape.max_stages = 1;
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = testing::random_instance(gen, shape);
    const auto gf = optimize(inst.dist, inst.plan, inst.budgets, {Criterion::DemographicParity, Scope::Global});
    const auto lf = optimize(inst.dist, inst.plan, inst.budgets, {Criterion::DemographicParity, Scope::Local});
    if (lf.utility > 0.0) {
      EXPECT_NEAR(polf(gf.utility, lf.utility), 1.0, 1e-12);
    }
  }
}

TEST(PolfBound, Arithmetic) {
  JointDistribution half(FeatureSpace({"x"}), {0.5, 0.5}, {0.5, 0.5});
  EXPECT_DOUBLE_EQ(polf_bound(half, Budgets{{0.3}}), 2.0);
  JointDistribution low(FeatureSpace({"x"}), {0.5, 0.5}, {0.1, 0.3});
  EXPECT_NEAR(polf_bound(low, Budgets{{0.3}}), 1.0 / 0.3, 1e-12);
}

TEST(PolfBound, HoldsOnRandomInstances) {
  std::mt19937_64 gen(6);
  testing::InstanceShape shape;
  shape.max_stages = 3;
  shape.max_observed = 5;
  for (int trial = 0; trial < 150; ++trial) {
    const auto inst = testing::random_instance(gen, shape);
    for (auto c : {Criterion::DemographicParity, Criterion::EqualOpportunity}) {
      const auto gf = optimize(inst.dist, inst.plan, inst.budgets, {c, Scope::Global});
      const auto lf = optimize(inst.dist, inst.plan, inst.budgets, {c, Scope::Local});
      if (lf.utility <= 0.0) continue;
      const double p = polf(gf.utility, lf.utility);
      EXPECT_GE(p, 1.0 - 1e-9);
      EXPECT_LE(p, polf_bound(inst.dist, inst.budgets) + 1e-9);
    }
  }
}

TEST(Volf, LocalOptimumHasNoViolation) {
  std::mt19937_64 gen(7);
  testing::InstanceShape shape;
  shape.max_stages = 3;
  shape.max_observed = 5;
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = testing::random_instance(gen, shape);
    for (auto c : {Criterion::DemographicParity, Criterion::EqualOpportunity}) {
      const bool eo = c == Criterion::EqualOpportunity;
      if (group_mass(inst.dist, inst.plan.sensitive, 0, eo) <= 0.0 ||
          group_mass(inst.dist, inst.plan.sensitive, 1, eo) <= 0.0) {
        continue;
      }
      const auto lf = optimize(inst.dist, inst.plan, inst.budgets, {c, Scope::Local});
      const auto v = volf(lf.policy, inst.dist, inst.plan, c);
      EXPECT_EQ(v.stage_gaps.size(), inst.plan.stages() - 1);
      for (double g : v.stage_gaps) EXPECT_LE(g, 1e-9);
      EXPECT_LE(v.scalar, 1e-9);
    }
  }
}

TEST(Volf, SymmetricInstanceIsZero) {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 30; ++trial) {
    const auto dist = testing::symmetric_distribution(gen, 5, 4);
    StagePlan plan{{2, 4}, 4, SensitivePlacement::unobserved()};
    const auto gf = optimize(dist, plan, Budgets{{0.6, 0.3}}, {Criterion::DemographicParity, Scope::Global});
    EXPECT_LE(volf(gf.policy, dist, plan, Criterion::DemographicParity).scalar, 1e-9);
  }
}

TEST(Volf, ScalarIsStageOneForTwoStagesAndMaxOtherwise) {
  std::mt19937_64 gen(9);
  const auto dist = testing::random_distribution(gen, {"a", "b", "c", "s"});
  StagePlan plan{{1, 2, 3}, 3, SensitivePlacement::unobserved()};
  const auto policy = policy_from_conditionals(plan, {{0.9, 0.2}, {0.5, 1.0, 0.1, 0.7}, std::vector<double>(8, 0.5)});
  const auto v = volf(policy, dist, plan, Criterion::DemographicParity);
  ASSERT_EQ(v.stage_gaps.size(), 2u);
  EXPECT_DOUBLE_EQ(v.scalar, std::max(v.stage_gaps[0], v.stage_gaps[1]));
  for (std::size_t i = 0; i < 2; ++i) {
    const auto r = testing::stage_rates(policy, dist, plan, i, false);
    EXPECT_NEAR(v.stage_gaps[i], std::abs(r.pass[0] - r.pass[1]), 1e-12);
  }
}

TEST(Polf, AdultReferenceInstance) {
  const auto full = testing::load_distribution(MSFAIR_DATA_DIR, "adult");
  const std::vector<std::string> names{"age", "education", "relationship", "country", "sex"};
  const auto dist = project(full, names);
  StagePlan plan{{2, 5}, 4, SensitivePlacement::at_stage(2)};
  const Budgets budgets{{0.33, 0.3}};
  const auto gf = optimize(dist, plan, budgets, {Criterion::DemographicParity, Scope::Global});
  const auto lf = optimize(dist, plan, budgets, {Criterion::DemographicParity, Scope::Local});
  EXPECT_NEAR(polf(gf.utility, lf.utility), 1.3, 0.15);
}

}  // namespace
}  // namespace msfair
