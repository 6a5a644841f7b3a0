#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "data_fixture.hpp"
#include "grid_oracle.hpp"
#include "msfair/format.hpp"
#include "msfair/harness.hpp"
#include "msfair/metrics.hpp"
#include "msfair/montecarlo.hpp"
#include "msfair/policy.hpp"
#include "random_instances.hpp"
#include "rate_oracle.hpp"
#include "vertex_oracle.hpp"

namespace fs = std::filesystem;
using namespace msfair;

namespace {

constexpr double kChainSlack = 1e-9;
constexpr double kResidual = 1e-9;
constexpr double kVertexTolerance = 1e-6;
const std::vector<std::string> kDatasets{"adult", "compas", "german"};

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  std::string data_dir;
  std::string cli;
  fs::path work_dir;
  std::size_t threads = 1;

  // Filled lazily and shared between criteria.
  std::map<std::string, JointDistribution> dists;
  std::map<std::string, SweepResult> enumerations;
  std::map<std::string, ThreeStageResult> three_stage;
  std::vector<SweepRow> reference_sweep;

  const JointDistribution& dist(const std::string& id) {
    auto it = dists.find(id);
    if (it == dists.end()) it = dists.emplace(id, testing::load_distribution(data_dir, id)).first;
    return it->second;
  }

  SweepConfig config() const {
    SweepConfig c;
    c.threads = threads;
    return c;
  }

  const SweepResult& enumeration(const std::string& id) {
    auto it = enumerations.find(id);
    if (it == enumerations.end()) it = enumerations.emplace(id, enumerate_combinations(id, dist(id), config())).first;
    return it->second;
  }

  const ThreeStageResult& three(const std::string& id) {
    auto it = three_stage.find(id);
    if (it == three_stage.end()) {
      auto c = config();
      c.placements = {SensitivePlacement::at_stage(1), SensitivePlacement::at_stage(2),
                      SensitivePlacement::at_stage(3)};
      it = three_stage.emplace(id, three_stage_study(id, dist(id), c)).first;
    }
    return it->second;
  }
};

std::string fmt(double v, int digits = 4) { return format_fixed(v, digits); }

InstanceSpec reference_spec() {
  InstanceSpec spec;
  spec.dataset = "adult";
  spec.combination = "reference";
  spec.stages = {{"age", "education"}, {"relationship", "country"}};
  spec.sensitive = "sex";
  spec.placement = SensitivePlacement::at_stage(2);
  spec.alphas = {0.33, 0.3};
  spec.criterion = Criterion::DemographicParity;
  return spec;
}

const std::vector<SweepRow>& reference_sweep(Context& ctx) {
  if (ctx.reference_sweep.empty()) ctx.reference_sweep = sweep_alpha(ctx.dist("adult"), reference_spec(), ctx.config()).rows;
  return ctx.reference_sweep;
}

std::size_t variable_count(const StagePlan& plan) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < plan.stages(); ++i) n += plan.prefix_count(i);
  return n;
}

Outcome oracle_equivalence(Context&) {
  std::mt19937_64 gen(20240601);
  testing::InstanceShape shape;  // <= 3 observed features, k <= 2
  double grid_gap = 0.0, vertex_gap = 0.0, slack_used = 0.0;
  std::size_t grid_fail = 0, vertex_fail = 0, vertex_checks = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = testing::random_instance(gen, shape);
    for (auto criterion : {Criterion::DemographicParity, Criterion::EqualOpportunity}) {
      for (auto scope : {Scope::Unconstrained, Scope::Global, Scope::Local}) {
        const FairnessSpec f{criterion, scope};
        const auto lp = optimize(inst.dist, inst.plan, inst.budgets, f);
        const auto grid = testing::grid_oracle(inst.dist, inst.plan, inst.budgets, f);
        const double gap = lp.utility - grid.utility;
        if (!grid.feasible || gap < -1e-6 || gap > grid.slack) ++grid_fail;
        grid_gap = std::max(grid_gap, std::abs(gap));
        slack_used = std::max(slack_used, grid.slack > 0.0 ? gap / grid.slack : 0.0);
        if (variable_count(inst.plan) <= 8) {
          const auto vertices = testing::enumerate_vertices(assemble(inst.dist, inst.plan, inst.budgets, f).problem);
          ++vertex_checks;
          const double vgap = vertices.feasible ? std::abs(vertices.objective - lp.utility) : 1.0;
          if (vgap > kVertexTolerance) ++vertex_fail;
          vertex_gap = std::max(vertex_gap, vgap);
        }
      }
    }
  }
  std::ostringstream d;
  d << "grid: " << grid_fail << " outside slack, max |gap| " << format_double(grid_gap) << " (max "
    << fmt(slack_used, 3) << " of slack); vertex: " << vertex_fail << "/" << vertex_checks << " > 1e-6, max "
    << format_double(vertex_gap);
  return {grid_fail == 0 && vertex_fail == 0 && vertex_checks > 0, d.str()};
}

Outcome chain_and_bound(Context& ctx) {
  std::size_t rows = 0, violations = 0;
  std::string first;
  const auto scan = [&](const std::vector<SweepRow>& rs) {
    for (const auto& r : rs) {
      ++rows;
      bool bad = r.u_lf > r.u_gf + kChainSlack || r.u_gf > r.u_un + kChainSlack;
      bad = bad || r.polf < 1.0 - kChainSlack || r.polf > r.polf_bound + kChainSlack;
      const auto v = check_row(r);
      if (bad || !v.empty()) {
        if (first.empty()) first = v.empty() ? r.spec.dataset + " " + r.spec.combination : v.front();
        ++violations;
      }
    }
  };
  for (const auto& id : kDatasets) {
    scan(ctx.enumeration(id).rows);
    scan(ctx.three(id).sweep.rows);
  }
  scan(reference_sweep(ctx));
  std::string d = std::to_string(violations) + " violations over " + std::to_string(rows) + " rows";
  if (!first.empty()) d += "; first: " + first;
  return {violations == 0, d};
}

Outcome local_implies_global(Context&) {
  std::mt19937_64 gen(20240602);
  testing::InstanceShape shape;
  shape.max_stages = 3;
  shape.max_observed = 5;
  double worst = 0.0;
  std::size_t checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = testing::random_instance(gen, shape);
    for (auto c : {Criterion::DemographicParity, Criterion::EqualOpportunity}) {
      const bool eo = c == Criterion::EqualOpportunity;
      if (group_mass(inst.dist, inst.plan.sensitive, 0, eo) <= 0.0 ||
          group_mass(inst.dist, inst.plan.sensitive, 1, eo) <= 0.0) {
        continue;
      }
      ++checked;
      const auto lf = optimize(inst.dist, inst.plan, inst.budgets, {c, Scope::Local});
      const auto x = testing::flatten(lf.policy);
      const auto global = build_fairness_rows(inst.dist, inst.plan, {c, Scope::Global}, VariableLayout(inst.plan));
      for (const auto& r : global.rows) worst = std::max(worst, testing::row_residual(r, x));
      for (std::size_t i = 0; i < inst.plan.stages(); ++i) {
        const auto rates = testing::stage_rates(lf.policy, inst.dist, inst.plan, i, eo);
        worst = std::max(worst, std::abs(rates.pass[0] - rates.pass[1]));
        if (rates.survivor[0] && rates.survivor[1]) {
          worst = std::max(worst, std::abs(*rates.survivor[0] - *rates.survivor[1]));
        }
      }
    }
  }
  return {worst <= kResidual && checked > 0,
          std::to_string(checked) + " instance/criterion pairs, max residual " + format_double(worst)};
}

// Checks one series of utilities on an evenly spaced increasing grid.
std::size_t shape_violations(const std::vector<double>& u) {
  std::size_t bad = 0;
  for (std::size_t i = 1; i < u.size(); ++i) bad += u[i] < u[i - 1] - kChainSlack ? 1 : 0;
  for (std::size_t a = 0; a < u.size(); ++a) {
    for (std::size_t b = a + 2; b < u.size(); b += 2) bad += u[(a + b) / 2] < 0.5 * (u[a] + u[b]) - kChainSlack ? 1 : 0;
  }
  return bad;
}

Outcome budget_shape(Context& ctx) {
  // Alpha_1 grids: every enumeration instance plus the reference sweep, per scope.
  std::map<std::string, std::vector<const SweepRow*>> series;
  const auto key = [](const SweepRow& r) {
    std::string k = r.spec.dataset + "|" + r.spec.combination + "|" + r.spec.sensitive + "|" +
                    r.spec.placement.label() + "|" + std::string(to_string(r.spec.criterion));
    for (const auto& st : r.spec.stages) {
      for (const auto& f : st) k += "," + f;
      k += ";";
    }
    return k;
  };
  for (const auto& id : kDatasets) {
    for (const auto& r : ctx.enumeration(id).rows) series[key(r)].push_back(&r);
  }
  for (const auto& r : reference_sweep(ctx)) series[key(r)].push_back(&r);

  std::size_t grids = 0, bad = 0;
  for (auto& [k, rows] : series) {
    std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->spec.alphas[0] < b->spec.alphas[0]; });
    std::vector<double> un, gf, lf;
    for (const auto* r : rows) {
      un.push_back(r->u_un);
      gf.push_back(r->u_gf);
      lf.push_back(r->u_lf);
    }
    bad += shape_violations(un) + shape_violations(gf) + shape_violations(lf);
    grids += 3;
  }

  // Five-point alpha_k grid with alpha_1 fixed: the reference instance and random ones.
  std::size_t last_bad = 0, last_checked = 0;
  const auto check_last = [&](const JointDistribution& dist, const StagePlan& plan) {
    for (auto scope : {Scope::Unconstrained, Scope::Global, Scope::Local}) {
      double prev = 2.0;
      for (double ak : {0.1, 0.2, 0.3, 0.4, 0.5}) {
        const double v = optimize(dist, plan, Budgets{{0.5, ak}}, {Criterion::DemographicParity, scope}).utility;
        last_bad += v > prev + kChainSlack ? 1 : 0;
        prev = v;
      }
      ++last_checked;
    }
  };
  const auto layout = layout_instance(reference_spec());
  check_last(project(ctx.dist("adult"), layout.order), layout.plan);
  std::mt19937_64 gen(20240603);
  testing::InstanceShape shape;
  shape.max_stages = 2;
  shape.max_observed = 4;
  for (int i = 0; i < 50;) {
    const auto inst = testing::random_instance(gen, shape);
    if (inst.plan.stages() != 2) continue;
    check_last(inst.dist, inst.plan);
    ++i;
  }
  std::ostringstream d;
  d << bad << " violations over " << grids << " alpha_1 grids; " << last_bad << " over " << last_checked
    << " alpha_k grids";
  return {bad == 0 && last_bad == 0 && grids > 0, d.str()};
}

Outcome reference_point(Context& ctx) {
  const auto row = solve_instance(ctx.dist("adult"), reference_spec());
  const bool in = row.polf >= 1.15 && row.polf <= 1.45;
  return {in, "PoLF " + fmt(row.polf) + " (U_gf " + fmt(row.u_gf) + ", U_lf " + fmt(row.u_lf) + "), target [1.15, 1.45]"};
}

Outcome adult_extremes(Context& ctx) {
  double max_polf = 0.0, max_volf = 0.0;
  for (const auto& r : ctx.enumeration("adult").rows) {
    if (r.spec.criterion != Criterion::DemographicParity) continue;
    max_polf = std::max(max_polf, r.polf);
    max_volf = std::max(max_volf, r.volf);
  }
  const bool ok = max_polf >= 1.4 && max_polf <= 1.8 && max_volf >= 0.5 && max_volf <= 0.7;
  return {ok, "max PoLF " + fmt(max_polf) + " in [1.4, 1.8]; max VoLF " + fmt(max_volf) + " in [0.5, 0.7]"};
}

Outcome cdf_ordering(Context& ctx) {
  bool ok = true;
  std::ostringstream d;
  for (const auto& id : kDatasets) {
    std::map<std::string, std::vector<double>> polf, volf;
    for (const auto& r : ctx.enumeration(id).rows) {
      if (r.spec.criterion != Criterion::DemographicParity) continue;
      polf[r.spec.placement.label()].push_back(r.polf);
      volf[r.spec.placement.label()].push_back(r.volf);
    }
    const double p1 = median(polf["stage1"]), p2 = median(polf["stage2"]);
    const double v1 = median(volf["stage1"]), v2 = median(volf["stage2"]), vu = median(volf["unobserved"]);
    std::array<std::vector<double>, 3> three;
    for (const auto& row : ctx.three(id).joint) {
      if (row.criterion != Criterion::DemographicParity) continue;
      for (std::size_t p = 0; p < 3; ++p) three[p].push_back(row.polf[p]);
    }
    const double t1 = median(three[0]), t2 = median(three[1]), t3 = median(three[2]);
    const bool here = p1 <= p2 && v1 >= v2 && v2 >= vu && t1 <= t2 && t2 <= t3;
    ok = ok && here;
    d << id << (here ? "" : " [FAILED]") << ": PoLF " << fmt(p1) << "<=" << fmt(p2) << ", VoLF " << fmt(v1)
      << ">=" << fmt(v2) << ">=" << fmt(vu) << ", three-stage " << fmt(t1) << "<=" << fmt(t2) << "<=" << fmt(t3)
      << "; ";
  }
  return {ok, d.str()};
}

Outcome monte_carlo(Context& ctx) {
  const auto layout = layout_instance(reference_spec());
  const auto dist = project(ctx.dist("adult"), layout.order);
  const Budgets budgets{reference_spec().alphas};
  const auto gf = optimize(dist, layout.plan, budgets, {Criterion::DemographicParity, Scope::Global});
  const std::vector<std::size_t> ns{1000, 10000, 100000, 1000000};
  ConvergenceOptions options;
  options.threads = ctx.threads;
  const auto study = convergence_study(dist, gf.policy, layout.plan, ns, 20, 20240604, options);

  bool ok = true;
  std::ostringstream d;
  d << "slopes";
  for (const auto& s : study.series) {
    const bool in = s.slope && *s.slope >= -0.65 && *s.slope <= -0.35;
    ok = ok && in;
    d << ' ' << s.quantity << '@' << s.stage << '=' << (s.slope ? fmt(*s.slope, 3) : std::string("n/a"));
  }
  const double p = gf.utility;
  const double sigma = std::sqrt(p * (1.0 - p) / (1e6 * budgets.alphas.back()));
  double worst_z = 0.0;
  std::size_t reps = 0;
  for (const auto& r : study.rows) {
    if (r.n != 1000000 || r.quantity != "precision") continue;
    ++reps;
    worst_z = r.realized ? std::max(worst_z, std::abs(*r.realized - p) / sigma) : 1e9;
  }
  ok = ok && reps == 20 && worst_z <= 3.0;
  d << "; precision at n=1e6: worst |z| " << fmt(worst_z, 2) << " over " << reps << " reps";
  return {ok, d.str()};
}

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism(Context& ctx) {
  std::ostringstream d;
  bool ok = true;
  for (const auto& id : kDatasets) {
    std::string outputs[2];
    int codes[2];
    for (int t = 0; t < 2; ++t) {
      const auto dir = ctx.work_dir / ("determinism_" + id + (t == 0 ? "_t1" : "_t8"));
      fs::remove_all(dir);
      codes[t] = run_command(ctx.cli + " enumerate --dataset " + id + " --data-dir " + ctx.data_dir + " --criterion both" +
                             " --threads " + (t == 0 ? "1" : "8") + " --no-svg --out-dir " + dir.string() +
                             " > /dev/null");
      outputs[t] = slurp(dir / "results.csv");
    }
    const bool same = codes[0] == 0 && codes[1] == 0 && !outputs[0].empty() && outputs[0] == outputs[1];
    ok = ok && same;
    d << id << ' ' << (same ? "identical" : "DIFFERENT") << " (" << outputs[0].size() << " bytes); ";
  }
  return {ok, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  Context ctx;
  ctx.data_dir = MSFAIR_DATA_DIR;
  ctx.cli = MSFAIR_CLI;
  std::string work_dir = (fs::temp_directory_path() / "msfair_acceptance").string();
  std::vector<int> only;
  ctx.threads = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--work-dir", work_dir, "scratch directory for CLI runs");
  app.add_option("--data-dir", ctx.data_dir, "raw dataset directory");
  app.add_option("--cli", ctx.cli, "msfair executable");
  app.add_option("--threads", ctx.threads, "worker threads for sweeps")->check(CLI::PositiveNumber);
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  ctx.work_dir = work_dir;
  fs::create_directories(ctx.work_dir);

  struct Check {
    int id;
    std::string name;
    double limit_seconds;  // 0: no runtime requirement
    std::function<Outcome(Context&)> run;
  };
  const std::vector<Check> criteria{
      {1, "oracle equivalence", 120.0, oracle_equivalence},
      {2, "inequality chain and PoLF bound", 0.0, chain_and_bound},
      {3, "local fairness implies global and both local forms", 0.0, local_implies_global},
      {4, "monotone and concave in alpha_1, non-increasing in alpha_k", 0.0, budget_shape},
      {5, "Adult reference instance PoLF", 10.0, reference_point},
      {6, "Adult DP extremes", 600.0, adult_extremes},
      {7, "median orderings", 0.0, cdf_ordering},
      {8, "Monte Carlo convergence", 300.0, monte_carlo},
      {9, "thread-count determinism", 0.0, determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run(ctx);
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    // Runtime of criteria sharing cached sweeps is charged to whichever runs first.
    const bool in_time = c.limit_seconds == 0.0 || seconds <= c.limit_seconds;
    const bool pass = outcome.pass && in_time;
    failures += pass ? 0 : 1;
    std::cout << "criterion " << c.id << ": " << (pass ? "PASS" : "FAIL") << "  " << c.name << " -- "
              << outcome.detail << " [" << fmt(seconds, 1) << " s"
              << (c.limit_seconds > 0.0 ? ", limit " + fmt(c.limit_seconds, 0) + " s" : std::string()) << "]"
              << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
