#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "msfair/model.hpp"

namespace msfair {

/// Generator for stream `stream` of `seed`: std::mt19937_64 seeded with two
/// rounds of splitmix64 over (seed, stream). The Mersenne Twister sequence is
/// fixed by the standard, so streams agree across platforms.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream);

/// Uniform double in [0, 1) from the top 53 bits of one draw.
double uniform01(std::mt19937_64& gen);

struct Candidate {
  CellIndex cell = 0;
  std::uint8_t label = 0;
};

/// n i.i.d. candidates; cell by inverse CDF, label by Bernoulli(positive[cell]).
std::vector<Candidate> sample_cohort(const JointDistribution& dist, std::size_t n, std::uint64_t seed);

struct CohortResult {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::uint64_t>> counts;  // [stage][prefix] candidates passing the stage
  std::vector<std::uint64_t> selected;             // per stage
  std::vector<double> budget_fraction;             // selected / n
  std::uint64_t selected_positive = 0;             // final stage, y = 1
  std::optional<double> precision;                 // absent when nobody is selected
};

struct RunOptions {
  // Caps every stage at round(alpha_i * n) survivors, dropping a uniformly
  // random subset of the excess. Off by default: budgets hold in expectation.
  bool clip_to_quota = false;
  std::vector<double> alphas;  // required when clip_to_quota
};

/// Independent Bernoulli pass decisions per candidate per stage using the
/// policy's conditional probabilities.
CohortResult run_policy(std::span<const Candidate> cohort, const Policy& policy, const StagePlan& plan,
                        std::uint64_t seed, const RunOptions& options = {});

/// Population values the realized quantities converge to.
struct ExpectedQuantities {
  std::vector<std::vector<double>> prefix_fraction;  // [stage][prefix]
  std::vector<double> budget_fraction;
  double precision = 0.0;
};

ExpectedQuantities expected_quantities(const JointDistribution& dist, const Policy& policy, const StagePlan& plan);

struct ConvergenceRow {
  std::size_t n = 0;
  std::size_t rep = 0;
  std::size_t stage = 0;  // 1-based
  std::string quantity;   // "prefix:<bits>", "budget" or "precision"
  std::optional<double> realized;
  double expected = 0.0;
  std::optional<double> deviation;
};

/// Mean absolute deviation of one tracked quantity at one n.
struct ConvergencePoint {
  std::size_t n = 0;
  double mean_abs_deviation = 0.0;
  std::size_t samples = 0;  // replications with a defined realized value
};

struct ConvergenceSeries {
  std::size_t stage = 0;
  std::string quantity;  // "prefix_l1" (sum over prefixes), "budget" or "precision"
  std::vector<ConvergencePoint> points;
  std::optional<double> slope;  // log-log fit; absent when some deviation is zero
};

struct ConvergenceStudy {
  std::uint64_t seed = 0;
  std::vector<ConvergenceRow> rows;
  std::vector<ConvergenceSeries> series;
};

struct ConvergenceOptions {
  std::size_t threads = 1;
  RunOptions run;
};

/// Replication r at size n draws its cohort and pass decisions from streams
/// derived from (seed, n, r), so the output is independent of the thread count.
ConvergenceStudy convergence_study(const JointDistribution& dist, const Policy& policy, const StagePlan& plan,
                                   std::span<const std::size_t> n_grid, std::size_t replications, std::uint64_t seed,
                                   const ConvergenceOptions& options = {});

/// Least-squares slope of log(y) against log(x). Throws InputError on fewer
/// than two points or a non-positive value.
double loglog_slope(std::span<const double> x, std::span<const double> y);

/// CSV columns: n, rep, stage, quantity, realized, expected, deviation.
void write_convergence_csv(std::ostream& out, const ConvergenceStudy& study);

}  // namespace msfair
