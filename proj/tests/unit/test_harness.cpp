#include <gtest/gtest.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "msfair/harness.hpp"
#include "msfair/model.hpp"
#include "random_instances.hpp"

namespace fs = std::filesystem;

namespace msfair {
namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("msfair_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

InstanceSpec two_stage_spec(SensitivePlacement placement) {
  InstanceSpec s;
  s.dataset = "toy";
  s.combination = "c";
  s.stages = {{"a", "b"}, {"c", "d"}};
  s.sensitive = "s";
  s.placement = placement;
  s.alphas = {0.6, 0.3};
  return s;
}

JointDistribution toy_distribution(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  return testing::random_distribution(gen, {"a", "b", "c", "d", "s", "e"}, 0.05);
}

TEST(LayoutInstance, SensitiveJoinsRevealingStage) {
  auto l1 = layout_instance(two_stage_spec(SensitivePlacement::at_stage(1)));
  EXPECT_EQ(l1.order, (std::vector<std::string>{"a", "b", "s", "c", "d"}));
  EXPECT_EQ(l1.plan.cuts, (std::vector<std::size_t>{3, 5}));
  EXPECT_EQ(l1.plan.sensitive, 2u);

  auto l2 = layout_instance(two_stage_spec(SensitivePlacement::at_stage(2)));
  EXPECT_EQ(l2.order, (std::vector<std::string>{"a", "b", "c", "d", "s"}));
  EXPECT_EQ(l2.plan.cuts, (std::vector<std::size_t>{2, 5}));

  auto lu = layout_instance(two_stage_spec(SensitivePlacement::unobserved()));
  EXPECT_EQ(lu.plan.cuts, (std::vector<std::size_t>{2, 4}));
  EXPECT_EQ(lu.plan.sensitive, 4u);
}

TEST(AlphaGrid, IncludesEndpoints) {
  const auto g = alpha_grid(0.3, 0.05);
  ASSERT_EQ(g.size(), 15u);
  EXPECT_DOUBLE_EQ(g.front(), 0.3);
  EXPECT_DOUBLE_EQ(g.back(), 1.0);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] - g[i - 1], 0.05, 1e-12);
}

TEST(EmpiricalCdf, Examples) {
  const auto a = empirical_cdf({1.0, 1.0, 1.0});
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0], std::make_pair(1.0, 1.0));
  const auto b = empirical_cdf({2.0, 1.0});
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b[0], std::make_pair(1.0, 0.5));
  EXPECT_EQ(b[1], std::make_pair(2.0, 1.0));
  EXPECT_THROW(empirical_cdf({}), InputError);
}

TEST(EmpiricalCdf, MonotoneReachingOne) {
  std::mt19937_64 gen(1);
  std::vector<double> v(500);
  for (auto& x : v) x = std::floor(uniform01(gen) * 40.0);
  const auto cdf = empirical_cdf(v);
  for (std::size_t i = 1; i < cdf.size(); ++i) {
    EXPECT_LT(cdf[i - 1].first, cdf[i].first);
    EXPECT_LT(cdf[i - 1].second, cdf[i].second);
  }
  EXPECT_EQ(cdf.back().second, 1.0);
}

TEST(Median, OddAndEven) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_THROW(median({}), InputError);
}

TEST(SweepAlpha, OrderedUtilitiesAndEndpoints) {
  const auto dist = toy_distribution(2);
  SweepConfig config;
  auto base = two_stage_spec(SensitivePlacement::at_stage(1));
  const auto result = sweep_alpha(dist, base, config);
  ASSERT_EQ(result.rows.size(), 15u);
  EXPECT_TRUE(result.violations.empty());
  double prev = 0.0;
  for (const auto& r : result.rows) {
    EXPECT_LE(r.u_lf, r.u_gf + 1e-9);
    EXPECT_LE(r.u_gf, r.u_un + 1e-9);
    EXPECT_GE(r.u_un, prev - 1e-9);
    prev = r.u_un;
    EXPECT_TRUE(check_row(r).empty());
  }
  EXPECT_LE(result.rows.front().u_un, result.rows.back().u_un);
}

TEST(CheckRow, FlagsBrokenRows) {
  SweepRow r;
  r.spec = two_stage_spec(SensitivePlacement::at_stage(1));
  r.u_un = 0.5;
  r.u_gf = 0.6;
  r.u_lf = 0.4;
  r.polf = 1.5;
  r.polf_bound = 1.2;
  const auto v = check_row(r);
  EXPECT_GE(v.size(), 2u);
}

TEST(Enumeration, CountAndDistinctStageSets) {
  SweepConfig config;
  EXPECT_EQ(enumeration_count(config), 8100u);
  const auto dist = toy_distribution(3);
  const auto specs = enumeration_specs("toy", dist.space(), config);
  EXPECT_EQ(specs.size(), 8100u);
  std::set<std::string> keys;
  for (const auto& s : specs) {
    std::ostringstream k;
    for (const auto& st : s.stages) {
      std::set<std::string> sorted(st.begin(), st.end());
      for (const auto& f : sorted) k << f << ',';
      k << '|';
    }
    k << s.sensitive << s.placement.label() << s.alphas[0];
    keys.insert(k.str());
  }
  EXPECT_EQ(keys.size(), specs.size());
}

TEST(ThreeStage, SymmetricInstanceHasUnitPrice) {
  std::mt19937_64 gen(4);
  const auto dist = testing::symmetric_distribution(gen, 5, 4);
  SweepConfig config;
  config.placements = {SensitivePlacement::at_stage(1), SensitivePlacement::at_stage(2),
                       SensitivePlacement::at_stage(3)};
  config.grid_step = 0.35;
  const auto result = three_stage_study("sym", dist, config);
  // Only "s" is independent of everything else; the study also tries the
  // other features as the sensitive one.
  std::size_t checked = 0;
  for (const auto& row : result.joint) {
    if (row.sensitive != "s") continue;
    ++checked;
    for (double p : row.polf) EXPECT_NEAR(p, 1.0, 1e-9);
  }
  EXPECT_GT(checked, 0u);
}

std::vector<SweepRow> small_rows() {
  const auto dist = toy_distribution(5);
  SweepConfig config;
  config.grid_step = 0.35;
  config.criteria = {Criterion::DemographicParity, Criterion::EqualOpportunity};
  return enumerate_combinations("toy", dist, config).rows;
}

TEST(ResultsCsv, GoldenHeader) {
  EXPECT_STREQ(kResultsHeader,
               "dataset,criterion,combination,stage_features,sensitive,placement,alphas,u_un,u_gf,u_lf,polf,"
               "polf_bound,volf,volf_stages,warnings");
  std::ostringstream out;
  write_results_csv(out, {});
  EXPECT_EQ(out.str(), std::string(kResultsHeader) + "\n");
}

TEST(ResultsCsv, RoundTrip) {
  const auto rows = small_rows();
  std::ostringstream out;
  write_results_csv(out, rows);
  std::istringstream in(out.str());
  const auto back = read_results_csv(in);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].spec.stages, rows[i].spec.stages);
    EXPECT_EQ(back[i].spec.placement, rows[i].spec.placement);
    EXPECT_EQ(back[i].spec.alphas, rows[i].spec.alphas);
    EXPECT_EQ(back[i].u_gf, rows[i].u_gf);
    EXPECT_EQ(back[i].polf, rows[i].polf);
    EXPECT_EQ(back[i].volf_stages, rows[i].volf_stages);
  }
  std::ostringstream again;
  write_results_csv(again, back);
  EXPECT_EQ(again.str(), out.str());
}

TEST(EmitOutputs, ByteIdenticalAndParallelInvariant) {
  const auto rows = small_rows();
  const auto a = scratch("emit_a"), b = scratch("emit_b");
  emit_outputs(a, rows, {});
  emit_outputs(b, rows, {});
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    ++files;
    EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << entry.path();
  }
  EXPECT_GE(files, 8u);

  const auto dist = toy_distribution(5);
  SweepConfig config;
  config.grid_step = 0.35;
  config.criteria = {Criterion::DemographicParity, Criterion::EqualOpportunity};
  config.threads = 4;
  std::ostringstream serial, parallel;
  write_results_csv(serial, rows);
  write_results_csv(parallel, enumerate_combinations("toy", dist, config).rows);
  EXPECT_EQ(serial.str(), parallel.str());
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(EmitOutputs, EmptyRowsRejected) {
  const auto dir = scratch("emit_empty");
  EXPECT_THROW(emit_outputs(dir, {}, {}), InputError);
  EXPECT_FALSE(fs::exists(dir / "cdf_polf.csv"));
  fs::remove_all(dir);
}

TEST(EmitOutputs, SvgIsWellFormedXml) {
  const auto dir = scratch("emit_svg");
  emit_outputs(dir, small_rows(), {});
  std::size_t svgs = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".svg") continue;
    ++svgs;
    boost::property_tree::ptree tree;
    ASSERT_NO_THROW(boost::property_tree::read_xml(entry.path().string(), tree)) << entry.path();
    const auto& svg = tree.get_child("svg");
    EXPECT_EQ(svg.get<std::string>("<xmlattr>.xmlns"), "http://www.w3.org/2000/svg");
  }
  EXPECT_EQ(svgs, 3u);
  fs::remove_all(dir);
}

#ifdef MSFAIR_CLI
int run_cli(const std::string& args) {
  const std::string cmd = std::string(MSFAIR_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  const auto dist_path = (dir / "dist.json").string();
  write_distribution_file(dist_path, toy_distribution(6));

  EXPECT_EQ(run_cli("--no-such-flag"), 1);
  EXPECT_EQ(run_cli("solve --dist " + (dir / "missing.json").string() +
                    " --stages a,b\\|c,d --sensitive s --placement stage1 --alphas 0.6,0.3"),
            1);
  EXPECT_EQ(run_cli("solve --dist " + dist_path + " --stages a,b\\|c,d --sensitive s --placement stage1"
                    " --alphas 0.3,0.6"),
            1);
  const auto policy = (dir / "policy.json").string();
  EXPECT_EQ(run_cli("solve --dist " + dist_path + " --stages a,b\\|c,d --sensitive s --placement stage2"
                    " --alphas 0.6,0.3 --scope gf --output " + policy),
            0);
  EXPECT_EQ(run_cli("simulate --dist " + dist_path + " --policy " + policy + " --n 100,1000 --reps 3 --out " +
                    (dir / "sim.csv").string()),
            0);

  // A tampered results file whose PoLF exceeds its bound is an invariant violation.
  std::vector<SweepRow> rows = small_rows();
  rows.resize(3);
  rows[1].polf = rows[1].polf_bound + 1.0;
  {
    std::ofstream out(dir / "bad.csv");
    write_results_csv(out, rows);
  }
  EXPECT_EQ(run_cli("cdf --results " + (dir / "bad.csv").string() + " --out-dir " + (dir / "cdf").string()), 3);
  fs::remove_all(dir);
}
#endif

}  // namespace
}  // namespace msfair
