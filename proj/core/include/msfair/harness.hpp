#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "msfair/lp.hpp"
#include "msfair/model.hpp"

namespace msfair {

/// One optimization instance over a named distribution: decision features per
/// stage, the sensitive feature and where it is revealed, budgets, criterion.
struct InstanceSpec {
  std::string dataset;
  std::string combination;  // free-form id of the enumeration cell
  std::vector<std::vector<std::string>> stages;
  std::string sensitive;
  SensitivePlacement placement = SensitivePlacement::unobserved();
  std::vector<double> alphas;
  Criterion criterion = Criterion::DemographicParity;
};

/// Feature order and plan for an instance: stage blocks in order, with the
/// sensitive feature appended to the block of the stage that reveals it, or
/// after every decision feature when unobserved.
struct InstanceLayout {
  std::vector<std::string> order;
  StagePlan plan;
};

InstanceLayout layout_instance(const InstanceSpec& spec);

struct SweepRow {
  InstanceSpec spec;
  double u_un = 0.0;
  double u_gf = 0.0;
  double u_lf = 0.0;
  double polf = 0.0;
  double polf_bound = 0.0;
  double volf = 0.0;
  std::vector<double> volf_stages;
  double lf_gap = 0.0;  // largest intermediate gap of the local-fair optimum
  std::vector<std::string> warnings;
};

/// Solves the three scopes for one instance of `dist` (which must contain
/// every named feature).
SweepRow solve_instance(const JointDistribution& dist, const InstanceSpec& spec, const lp::SolverOptions& options = {});

/// Violated row invariants (utility chain, PoLF bounds, LF gaps), if any.
std::vector<std::string> check_row(const SweepRow& row);

struct SweepConfig {
  std::vector<Criterion> criteria{Criterion::DemographicParity};
  std::vector<SensitivePlacement> placements{SensitivePlacement::at_stage(1), SensitivePlacement::at_stage(2),
                                             SensitivePlacement::unobserved()};
  double alpha_k = 0.3;
  double grid_step = 0.05;
  std::size_t threads = 1;
  lp::SolverOptions solver;
};

/// alpha_k, alpha_k + step, ..., capped at 1 (always included).
std::vector<double> alpha_grid(double alpha_k, double step);

/// Validates a config; throws InputError.
void validate_config(const SweepConfig& config, std::size_t stages);

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<std::string> violations;
};

/// Runs every instance, `threads` at a time. Rows come back in input order.
SweepResult run_instances(const JointDistribution& dist, const std::vector<InstanceSpec>& specs,
                          const SweepConfig& config);

/// One two-stage template swept over the alpha_1 grid (alpha_2 = config.alpha_k).
std::vector<InstanceSpec> sweep_alpha_specs(const InstanceSpec& base, const SweepConfig& config);
SweepResult sweep_alpha(const JointDistribution& dist, const InstanceSpec& base, const SweepConfig& config);

/// Two-stage enumeration over a six-feature distribution: held-out feature,
/// sensitive feature, split of the remaining four into two stages of two
/// (stage sets, so C(4,2) splits), placements, criteria and the alpha_1 grid.
std::vector<InstanceSpec> enumeration_specs(const std::string& dataset, const FeatureSpace& space,
                                            const SweepConfig& config);
/// Closed-form size of enumeration_specs for a six-feature space.
std::size_t enumeration_count(const SweepConfig& config);
SweepResult enumerate_combinations(const std::string& dataset, const JointDistribution& dist,
                                   const SweepConfig& config);

/// Right-continuous step function: sorted distinct values with the fraction
/// of inputs <= value. Throws InputError on empty input.
std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> values);

/// Median; the mean of the two middle values for even counts.
double median(std::vector<double> values);

struct ThreeStageRow {
  std::string dataset;
  Criterion criterion = Criterion::DemographicParity;
  std::vector<std::string> order;  // decision feature per stage
  std::string sensitive;
  std::vector<double> alphas;
  std::array<double, 3> polf{};  // sensitive revealed at stage 1, 2, 3
};

struct ThreeStageResult {
  SweepResult sweep;  // one row per (instance, placement)
  std::vector<ThreeStageRow> joint;
};

/// Three stages with one decision feature each: every 4-of-6 feature set,
/// sensitive choice, stage order, placement 1..3 and alpha_1 >= alpha_2 >=
/// alpha_3 = config.alpha_k on the grid.
std::vector<InstanceSpec> three_stage_specs(const std::string& dataset, const FeatureSpace& space,
                                            const SweepConfig& config);
ThreeStageResult three_stage_study(const std::string& dataset, const JointDistribution& dist,
                                   const SweepConfig& config);

// Output files.

/// Frozen results CSV header.
extern const char* const kResultsHeader;

void write_results_csv(std::ostream& out, const std::vector<SweepRow>& rows);
/// Inverse of write_results_csv. Throws InputError on a header mismatch or a
/// malformed line.
std::vector<SweepRow> read_results_csv(std::istream& in);
void write_three_stage_csv(std::ostream& out, const std::vector<ThreeStageRow>& rows);

struct EmitOptions {
  bool svg = true;
  std::string header_note;  // echoed into summary.json, e.g. the enumeration count
};

/// results.csv, cdf_polf.csv, cdf_volf.csv, scatter.csv, summary.json and,
/// with options.svg, cdf_polf.svg, cdf_volf.svg and scatter.svg under
/// `dir`. CDFs are grouped by (dataset, criterion, placement). Throws
/// InputError on empty rows or an unwritable directory.
void emit_outputs(const std::filesystem::path& dir, const std::vector<SweepRow>& rows, const EmitOptions& options);

/// sweep.csv (same columns as results.csv) and sweep.svg with the three
/// utility curves against alpha_1.
void emit_sweep(const std::filesystem::path& dir, const std::vector<SweepRow>& rows, const EmitOptions& options);

/// three_stage.csv, three_stage_cdf.csv and (with svg) three_stage_cdf.svg
/// and three_stage_scatter.svg.
void emit_three_stage(const std::filesystem::path& dir, const ThreeStageResult& result, const EmitOptions& options);

}  // namespace msfair
