// msfair: command line front end for the fair multistage selection library.
//
// Exit codes: 0 ok, 1 input error, 2 solver failure, 3 invariant violation
// detected in outputs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "msfair/datasets.hpp"
#include "msfair/format.hpp"
#include "msfair/harness.hpp"
#include "msfair/metrics.hpp"
#include "msfair/montecarlo.hpp"
#include "msfair/policy.hpp"

namespace fs = std::filesystem;
using namespace msfair;

namespace {

constexpr int kExitInput = 1;
constexpr int kExitSolver = 2;
constexpr int kExitInvariant = 3;

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_alphas(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw InputError("'" + item + "' is not a budget");
    }
  }
  if (out.empty()) throw InputError("no budgets given");
  return out;
}

// "a,b|c,d" -> {{a,b},{c,d}}
std::vector<std::vector<std::string>> parse_stages(const std::string& text) {
  std::vector<std::vector<std::string>> out;
  for (const auto& block : split_list(text, '|')) out.push_back(split_list(block, ','));
  if (out.empty()) throw InputError("no stages given");
  return out;
}

/// Where a distribution comes from: an interchange file or a raw dataset.
struct Source {
  std::string dist_file;
  std::string dataset;
  std::vector<std::string> inputs;
  std::string data_dir = MSFAIR_DEFAULT_DATA_DIR;
  bool invert_label = false;

  void add_options(CLI::App* app) {
    app->add_option("--dist", dist_file, "distribution JSON file");
    app->add_option("--dataset", dataset, "builtin recipe: adult, compas or german");
    app->add_option("--input", inputs, "raw file(s) for --dataset (default: the public release under --data-dir)");
    app->add_option("--data-dir", data_dir, "directory holding the raw dataset files");
    app->add_flag("--invert-label", invert_label, "use y=1 for the recipe's negative outcome");
  }

  std::string name() const {
    if (!dataset.empty()) return dataset;
    return fs::path(dist_file).stem().string();
  }

  std::string label_note() const {
    return invert_label ? "label inverted (--invert-label)" : std::string();
  }

  JointDistribution load() const {
    if (!dist_file.empty() && !dataset.empty()) throw InputError("give either --dist or --dataset, not both");
    if (!dist_file.empty()) return read_distribution_file(dist_file);
    if (dataset.empty()) throw InputError("a distribution is required: --dist <file> or --dataset <name>");
    const auto& recipe = builtin_recipe(dataset);
    std::vector<std::string> paths = inputs;
    if (paths.empty()) {
      for (const auto& f : recipe.raw_files) paths.push_back((fs::path(data_dir) / f).string());
    }
    const auto ingested = load_and_binarize(paths, recipe, IngestOptions{invert_label});
    const auto names = recipe.feature_names();
    return estimate_distribution(ingested.batch, names);
  }
};

struct SweepFlags {
  std::string criterion = "dp";
  std::vector<std::string> placements;
  double alpha_k = 0.3;
  double grid_step = 0.05;
  std::size_t threads = 1;
  std::string out_dir = "out";
  bool no_svg = false;

  void add_options(CLI::App* app, bool with_placements) {
    app->add_option("--criterion", criterion, "dp, eo or both")->check(CLI::IsMember({"dp", "eo", "both"}));
    if (with_placements) {
      app->add_option("--placements", placements, "sensitive placements (stage1, stage2, unobserved)");
    }
    app->add_option("--alpha-k", alpha_k, "final-stage budget");
    app->add_option("--grid-step", grid_step, "alpha grid step");
    app->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    app->add_option("--out-dir", out_dir, "output directory");
    app->add_flag("--no-svg", no_svg, "skip SVG plots");
  }

  SweepConfig config() const {
    SweepConfig c;
    if (criterion == "both") {
      c.criteria = {Criterion::DemographicParity, Criterion::EqualOpportunity};
    } else {
      c.criteria = {parse_criterion(criterion)};
    }
    if (!placements.empty()) {
      c.placements.clear();
      for (const auto& p : placements) c.placements.push_back(SensitivePlacement::parse(p));
    }
    c.alpha_k = alpha_k;
    c.grid_step = grid_step;
    c.threads = threads;
    return c;
  }
};

int report_violations(const std::vector<std::string>& violations) {
  if (violations.empty()) return 0;
  std::cerr << violations.size() << " invariant violation(s):\n";
  for (std::size_t i = 0; i < violations.size() && i < 20; ++i) std::cerr << "  " << violations[i] << '\n';
  return kExitInvariant;
}

int run_ingest(const std::string& dataset, const std::vector<std::string>& inputs, const std::string& data_dir,
               const std::string& features, const std::string& output, std::string report_path, bool invert) {
  const auto& recipe = builtin_recipe(dataset);
  std::vector<std::string> paths = inputs;
  if (paths.empty()) {
    for (const auto& f : recipe.raw_files) paths.push_back((fs::path(data_dir) / f).string());
  }
  const auto ingested = load_and_binarize(paths, recipe, IngestOptions{invert});
  const auto names = features.empty() ? recipe.feature_names() : split_list(features, ',');
  const auto dist = estimate_distribution(ingested.batch, names);
  write_distribution_file(output, dist);
  if (report_path.empty()) report_path = fs::path(output).replace_extension(".report.json").string();
  std::ofstream rep(report_path);
  if (!rep) throw InputError("cannot write '" + report_path + "'");
  write_ingest_report(rep, ingested.report, dist);
  std::cout << dataset << ": kept " << ingested.report.rows_kept << " rows, filtered "
            << ingested.report.rows_filtered << ", skipped " << ingested.report.rows_skipped << "; P(y=1) = "
            << format_fixed(dist.positive_rate(), 4) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fair multistage selection: optimal policies, PoLF/VoLF sweeps and simulation"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "binarize a raw dataset into a distribution file");
  std::string in_dataset, in_features, in_output, in_report, in_data_dir = MSFAIR_DEFAULT_DATA_DIR;
  std::vector<std::string> in_inputs;
  bool in_invert = false;
  ingest->add_option("--dataset", in_dataset, "adult, compas or german")->required();
  ingest->add_option("--input", in_inputs, "raw file(s); default: the public release under --data-dir");
  ingest->add_option("--data-dir", in_data_dir, "directory holding the raw dataset files");
  ingest->add_option("--features", in_features, "comma-separated recipe features, in output order");
  ingest->add_option("--output", in_output, "distribution JSON to write")->required();
  ingest->add_option("--report", in_report, "sidecar report (default: <output>.report.json)");
  ingest->add_flag("--invert-label", in_invert, "use y=1 for the recipe's negative outcome");

  // solve
  auto* solve = app.add_subcommand("solve", "optimal policy for one instance");
  Source solve_src;
  solve_src.add_options(solve);
  std::string sv_stages, sv_sensitive, sv_placement = "unobserved", sv_alphas, sv_criterion = "dp",
                                       sv_scope = "gf", sv_output, sv_dump;
  solve->add_option("--stages", sv_stages, "decision features per stage, e.g. 'age,education|relationship,country'")
      ->required();
  solve->add_option("--sensitive", sv_sensitive, "sensitive feature")->required();
  solve->add_option("--placement", sv_placement, "stage1, stage2, ... or unobserved");
  solve->add_option("--alphas", sv_alphas, "budgets, e.g. 0.33,0.3")->required();
  solve->add_option("--criterion", sv_criterion, "dp or eo")->check(CLI::IsMember({"dp", "eo"}));
  solve->add_option("--scope", sv_scope, "un, gf or lf")->check(CLI::IsMember({"un", "gf", "lf"}));
  solve->add_option("--output", sv_output, "policy JSON to write");
  solve->add_option("--dump-lp", sv_dump, "write the assembled LP as text");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "alpha_1 sweep of one two-stage instance (all three scopes)");
  Source sweep_src;
  sweep_src.add_options(sweep);
  SweepFlags sweep_flags;
  sweep_flags.add_options(sweep, false);
  std::string sw_stages, sw_sensitive, sw_placement = "unobserved";
  sweep->add_option("--stages", sw_stages, "decision features per stage")->required();
  sweep->add_option("--sensitive", sw_sensitive, "sensitive feature")->required();
  sweep->add_option("--placement", sw_placement, "stage1, stage2 or unobserved");

  // enumerate
  auto* enumerate = app.add_subcommand("enumerate", "two-stage enumeration over every feature combination");
  Source enum_src;
  enum_src.add_options(enumerate);
  SweepFlags enum_flags;
  enum_flags.add_options(enumerate, true);

  // cdf
  auto* cdf = app.add_subcommand("cdf", "empirical CDFs, scatter data and plots from a results CSV");
  std::string cdf_results, cdf_out = "out";
  bool cdf_no_svg = false;
  cdf->add_option("--results", cdf_results, "results.csv from sweep or enumerate")->required();
  cdf->add_option("--out-dir", cdf_out, "output directory");
  cdf->add_flag("--no-svg", cdf_no_svg, "skip SVG plots");

  // three-stage
  auto* three = app.add_subcommand("three-stage", "three-stage study: PoLF by the stage revealing the sensitive feature");
  Source three_src;
  three_src.add_options(three);
  SweepFlags three_flags;
  three_flags.add_options(three, false);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "run a policy on sampled cohorts and measure convergence");
  std::string sim_dist, sim_policy, sim_out = "simulation.csv";
  std::vector<std::size_t> sim_n;
  std::size_t sim_reps = 20, sim_threads = 1;
  std::uint64_t sim_seed = 1;
  bool sim_clip = false;
  simulate->add_option("--dist", sim_dist, "distribution JSON")->required();
  simulate->add_option("--policy", sim_policy, "policy JSON from solve")->required();
  simulate->add_option("--n", sim_n, "cohort size(s), increasing")->required()->delimiter(',');
  simulate->add_option("--reps", sim_reps, "replications per size")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim_seed, "base seed");
  simulate->add_option("--threads", sim_threads, "worker threads")->check(CLI::PositiveNumber);
  simulate->add_option("--out", sim_out, "CSV of per-replication deviations");
  simulate->add_flag("--clip-to-quota", sim_clip, "cap each stage at round(alpha_i n) survivors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*ingest) {
      return run_ingest(in_dataset, in_inputs, in_data_dir, in_features, in_output, in_report, in_invert);
    }

    if (*solve) {
      const auto dist = solve_src.load();
      InstanceSpec spec;
      spec.dataset = solve_src.name();
      spec.stages = parse_stages(sv_stages);
      spec.sensitive = sv_sensitive;
      spec.placement = SensitivePlacement::parse(sv_placement);
      spec.alphas = parse_alphas(sv_alphas);
      spec.criterion = parse_criterion(sv_criterion);
      const auto layout = layout_instance(spec);
      const auto d = project(dist, layout.order);
      const Budgets budgets{spec.alphas};
      const FairnessSpec fairness{spec.criterion, parse_scope(sv_scope)};
      if (!sv_dump.empty()) {
        std::ofstream dump(sv_dump);
        if (!dump) throw InputError("cannot write '" + sv_dump + "'");
        lp::dump_lp(dump, assemble(d, layout.plan, budgets, fairness).problem);
      }
      auto result = optimize(d, layout.plan, budgets, fairness);
      const auto eval = evaluate(result.policy, d, layout.plan, budgets);
      std::cout << "utility " << format_double(result.utility) << " (" << lp::to_string(result.solution.status)
                << ", " << result.solution.iterations << " pivots)\n";
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
      if (!sv_output.empty()) {
        PolicyDocument doc{layout.order, budgets, fairness, std::move(result), eval};
        write_policy_file(sv_output, doc);
      }
      return 0;
    }

    if (*sweep) {
      const auto dist = sweep_src.load();
      InstanceSpec base;
      base.dataset = sweep_src.name();
      base.combination = "sweep";
      base.stages = parse_stages(sw_stages);
      base.sensitive = sw_sensitive;
      base.placement = SensitivePlacement::parse(sw_placement);
      auto config = sweep_flags.config();
      std::vector<SweepRow> rows;
      std::vector<std::string> violations;
      for (Criterion c : config.criteria) {
        base.criterion = c;
        auto r = sweep_alpha(dist, base, config);
        rows.insert(rows.end(), r.rows.begin(), r.rows.end());
        violations.insert(violations.end(), r.violations.begin(), r.violations.end());
      }
      emit_sweep(sweep_flags.out_dir, rows, {!sweep_flags.no_svg, sweep_src.label_note()});
      std::cout << "sweep: " << rows.size() << " rows written to " << sweep_flags.out_dir << '\n';
      return report_violations(violations);
    }

    if (*enumerate) {
      const auto dist = enum_src.load();
      const auto config = enum_flags.config();
      const auto grid = alpha_grid(config.alpha_k, config.grid_step);
      std::ostringstream header;
      header << enum_src.name() << ": " << enumeration_count(config) << " instances = 6 held-out x 5 sensitive x 6 "
             << "stage splits x " << config.placements.size() << " placements x " << grid.size()
             << " alpha_1 values x " << config.criteria.size() << " criteria";
      if (enum_src.invert_label) header << "; " << enum_src.label_note();
      std::cout << header.str() << '\n';
      const auto result = enumerate_combinations(enum_src.name(), dist, config);
      emit_outputs(enum_flags.out_dir, result.rows, {!enum_flags.no_svg, header.str()});
      std::cout << "enumerate: " << result.rows.size() << " rows written to " << enum_flags.out_dir << '\n';
      return report_violations(result.violations);
    }

    if (*cdf) {
      std::ifstream in(cdf_results);
      if (!in) throw InputError("cannot open '" + cdf_results + "'");
      const auto rows = read_results_csv(in);
      emit_outputs(cdf_out, rows, {!cdf_no_svg, "from " + cdf_results});
      std::cout << "cdf: " << rows.size() << " rows summarized in " << cdf_out << '\n';
      std::vector<std::string> violations;
      for (const auto& r : rows) {
        for (auto& v : check_row(r)) violations.push_back(std::move(v));
      }
      return report_violations(violations);
    }

    if (*three) {
      const auto dist = three_src.load();
      auto config = three_flags.config();
      config.placements = {SensitivePlacement::at_stage(1), SensitivePlacement::at_stage(2),
                           SensitivePlacement::at_stage(3)};
      const auto specs = three_stage_specs(three_src.name(), dist.space(), config);
      std::ostringstream header;
      header << three_src.name() << ": " << specs.size() / 3 << " three-stage instances x 3 placements";
      std::cout << header.str() << '\n';
      const auto result = three_stage_study(three_src.name(), dist, config);
      emit_three_stage(three_flags.out_dir, result, {!three_flags.no_svg, header.str()});
      std::cout << "three-stage: " << result.joint.size() << " instances written to " << three_flags.out_dir << '\n';
      return report_violations(result.sweep.violations);
    }

    if (*simulate) {
      const auto dist = read_distribution_file(sim_dist);
      const auto loaded = read_policy_file(sim_policy);
      const auto d = project(dist, loaded.features);
      ConvergenceOptions options;
      options.threads = sim_threads;
      options.run.clip_to_quota = sim_clip;
      options.run.alphas = loaded.budgets.alphas;
      const auto study = convergence_study(d, loaded.policy, loaded.policy.plan, sim_n, sim_reps, sim_seed, options);
      std::ofstream out(sim_out);
      if (!out) throw InputError("cannot write '" + sim_out + "'");
      write_convergence_csv(out, study);
      std::cout << "simulate: seed " << sim_seed << (sim_clip ? ", clipped to quotas" : "") << '\n';
      for (const auto& s : study.series) {
        std::cout << "  stage " << s.stage << ' ' << s.quantity << ": slope "
                  << (s.slope ? format_fixed(*s.slope, 3) : std::string("n/a")) << '\n';
      }
      return 0;
    }
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  } catch (const InvariantError& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return kExitInvariant;
  }
  return 0;
}
