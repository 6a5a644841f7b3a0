#include "msfair/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "msfair/format.hpp"
#include "msfair/metrics.hpp"
#include "msfair/policy.hpp"

namespace msfair {

namespace {

constexpr double kChainSlack = 1e-9;

std::string describe(const InstanceSpec& s) {
  std::string out = s.dataset + " " + std::string(to_string(s.criterion)) + " ";
  for (std::size_t i = 0; i < s.stages.size(); ++i) {
    if (i) out += '|';
    for (std::size_t j = 0; j < s.stages[i].size(); ++j) out += (j ? "+" : "") + s.stages[i][j];
  }
  out += " sensitive=" + s.sensitive + "@" + s.placement.label();
  std::vector<double> a = s.alphas;
  out += " alphas=" + join_doubles(a, ';');
  return out;
}

void append_unique(std::vector<std::string>& into, const std::vector<std::string>& from) {
  for (const auto& w : from) {
    if (std::find(into.begin(), into.end(), w) == into.end()) into.push_back(w);
  }
}

// Index subsets of {0..n-1} of size r in lexicographic order.
std::vector<std::vector<std::size_t>> subsets(std::size_t n, std::size_t r) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<bool> pick(n, false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(r), true);
  do {
    std::vector<std::size_t> s;
    for (std::size_t i = 0; i < n; ++i) {
      if (pick[i]) s.push_back(i);
    }
    out.push_back(std::move(s));
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return out;
}

}  // namespace

InstanceLayout layout_instance(const InstanceSpec& spec) {
  const std::size_t k = spec.stages.size();
  if (k == 0) throw InputError("an instance needs at least one stage");
  if (spec.alphas.size() != k) throw InputError("an instance needs one budget per stage");
  if (spec.placement.observed() && spec.placement.stage() > k) {
    throw InputError("sensitive placement " + spec.placement.label() + " exceeds the stage count");
  }
  InstanceLayout out;
  for (std::size_t i = 0; i < k; ++i) {
    if (spec.stages[i].empty() && !(spec.placement.observed() && spec.placement.stage() == i + 1)) {
      throw InputError("stage " + std::to_string(i + 1) + " reveals no feature");
    }
    for (const auto& f : spec.stages[i]) {
      if (f == spec.sensitive) throw InputError("the sensitive feature cannot also be a decision feature");
      out.order.push_back(f);
    }
    if (spec.placement.observed() && spec.placement.stage() == i + 1) {
      out.plan.sensitive = out.order.size();
      out.order.push_back(spec.sensitive);
    }
    out.plan.cuts.push_back(out.order.size());
  }
  if (!spec.placement.observed()) {
    out.plan.sensitive = out.order.size();
    out.order.push_back(spec.sensitive);
  }
  out.plan.placement = spec.placement;
  return out;
}

SweepRow solve_instance(const JointDistribution& dist, const InstanceSpec& spec, const lp::SolverOptions& options) {
  const auto layout = layout_instance(spec);
  const auto d = project(dist, layout.order);
  const auto& plan = layout.plan;
  const Budgets budgets{spec.alphas};

  const auto un = optimize(d, plan, budgets, {spec.criterion, Scope::Unconstrained}, options);
  const auto gf = optimize(d, plan, budgets, {spec.criterion, Scope::Global}, options);
  const auto lf = optimize(d, plan, budgets, {spec.criterion, Scope::Local}, options);

  SweepRow row;
  row.spec = spec;
  row.u_un = un.utility;
  row.u_gf = gf.utility;
  row.u_lf = lf.utility;
  row.polf_bound = polf_bound(d, budgets);
  if (lf.utility > 0.0) {
    row.polf = gf.utility / lf.utility;
  } else {
    row.warnings.push_back("local-fair utility is 0; PoLF undefined");
  }
  const auto v = volf(gf.policy, d, plan, spec.criterion);
  row.volf = v.scalar;
  row.volf_stages = v.stage_gaps;
  row.lf_gap = volf(lf.policy, d, plan, spec.criterion).scalar;
  append_unique(row.warnings, gf.warnings);
  append_unique(row.warnings, lf.warnings);
  return row;
}

std::vector<std::string> check_row(const SweepRow& row) {
  std::vector<std::string> out;
  const auto where = describe(row.spec);
  if (row.u_lf > row.u_gf + kChainSlack) out.push_back(where + ": U_LF > U_GF");
  if (row.u_gf > row.u_un + kChainSlack) out.push_back(where + ": U_GF > U_un");
  if (row.u_lf > 0.0) {
    if (row.polf < 1.0 - kChainSlack) out.push_back(where + ": PoLF < 1");
    if (row.polf > row.polf_bound + kChainSlack) out.push_back(where + ": PoLF above its bound");
  }
  if (row.lf_gap > kChainSlack) out.push_back(where + ": local-fair optimum has an intermediate gap");
  return out;
}

std::vector<double> alpha_grid(double alpha_k, double step) {
  if (!(alpha_k > 0.0 && alpha_k <= 1.0)) throw InputError("alpha_k must lie in (0, 1]");
  if (!(step > 0.0)) throw InputError("grid step must be positive");
  std::vector<double> out;
  for (std::size_t j = 0;; ++j) {
    // Snap to 1e-12 so that 0.3 + 14 * 0.05 prints as 1.
    double a = std::round((alpha_k + static_cast<double>(j) * step) * 1e12) / 1e12;
    if (a >= 1.0 - 1e-12) {
      out.push_back(1.0);
      break;
    }
    out.push_back(a);
  }
  return out;
}

void validate_config(const SweepConfig& config, std::size_t stages) {
  if (config.criteria.empty()) throw InputError("at least one criterion is required");
  if (config.placements.empty()) throw InputError("at least one sensitive placement is required");
  for (const auto& p : config.placements) {
    if (p.observed() && p.stage() > stages) throw InputError("placement " + p.label() + " exceeds the stage count");
  }
  if (!(config.alpha_k > 0.0 && config.alpha_k <= 1.0)) throw InputError("alpha_k must lie in (0, 1]");
  if (!(config.grid_step > 0.0)) throw InputError("grid step must be positive");
  if (config.alpha_k < 1.0 && config.grid_step > 1.0 - config.alpha_k + 1e-12) {
    throw InputError("grid step must not exceed 1 - alpha_k");
  }
  if (config.threads == 0) throw InputError("threads must be at least 1");
}

SweepResult run_instances(const JointDistribution& dist, const std::vector<InstanceSpec>& specs,
                          const SweepConfig& config) {
  SweepResult result;
  result.rows.resize(specs.size());
  std::vector<std::exception_ptr> errors(specs.size());
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t t = next++; t < specs.size(); t = next++) {
      try {
        result.rows[t] = solve_instance(dist, specs[t], config.solver);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t workers = std::min(config.threads, std::max<std::size_t>(specs.size(), 1));
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  // Rethrow the earliest failure so the reported error does not depend on scheduling.
  for (std::size_t t = 0; t < specs.size(); ++t) {
    if (!errors[t]) continue;
    try {
      std::rethrow_exception(errors[t]);
    } catch (const SolverError& e) {
      throw SolverError(describe(specs[t]) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError(describe(specs[t]) + ": " + e.what());
    }
  }
  for (const auto& row : result.rows) {
    for (auto& v : check_row(row)) result.violations.push_back(std::move(v));
  }
  return result;
}

std::vector<InstanceSpec> sweep_alpha_specs(const InstanceSpec& base, const SweepConfig& config) {
  if (base.stages.size() != 2) throw InputError("an alpha sweep needs a two-stage instance");
  validate_config(config, 2);
  std::vector<InstanceSpec> out;
  for (double a1 : alpha_grid(config.alpha_k, config.grid_step)) {
    InstanceSpec s = base;
    s.alphas = {a1, config.alpha_k};
    out.push_back(std::move(s));
  }
  return out;
}

SweepResult sweep_alpha(const JointDistribution& dist, const InstanceSpec& base, const SweepConfig& config) {
  return run_instances(dist, sweep_alpha_specs(base, config), config);
}

std::vector<InstanceSpec> enumeration_specs(const std::string& dataset, const FeatureSpace& space,
                                            const SweepConfig& config) {
  if (space.size() != 6) throw InputError("the enumeration needs exactly six features, got " +
                                          std::to_string(space.size()));
  validate_config(config, 2);
  const auto grid = alpha_grid(config.alpha_k, config.grid_step);
  const auto splits = subsets(4, 2);
  std::vector<InstanceSpec> out;
  for (Criterion criterion : config.criteria) {
    for (std::size_t held = 0; held < 6; ++held) {
      std::vector<std::size_t> kept;
      for (std::size_t f = 0; f < 6; ++f) {
        if (f != held) kept.push_back(f);
      }
      for (std::size_t s = 0; s < kept.size(); ++s) {
        std::vector<std::string> decision;
        for (std::size_t f : kept) {
          if (f != kept[s]) decision.push_back(space.name(f));
        }
        for (const auto& first : splits) {
          std::vector<std::string> stage1, stage2;
          for (std::size_t j = 0; j < 4; ++j) {
            (std::find(first.begin(), first.end(), j) != first.end() ? stage1 : stage2).push_back(decision[j]);
          }
          for (const auto& placement : config.placements) {
            for (double a1 : grid) {
              InstanceSpec spec;
              spec.dataset = dataset;
              spec.combination = "drop:" + space.name(held);
              spec.stages = {stage1, stage2};
              spec.sensitive = space.name(kept[s]);
              spec.placement = placement;
              spec.alphas = {a1, config.alpha_k};
              spec.criterion = criterion;
              out.push_back(std::move(spec));
            }
          }
        }
      }
    }
  }
  return out;
}

std::size_t enumeration_count(const SweepConfig& config) {
  // 6 held out x 5 sensitive x C(4,2) stage splits x placements x grid x criteria.
  return 6 * 5 * 6 * config.placements.size() * alpha_grid(config.alpha_k, config.grid_step).size() *
         config.criteria.size();
}

SweepResult enumerate_combinations(const std::string& dataset, const JointDistribution& dist,
                                   const SweepConfig& config) {
  return run_instances(dist, enumeration_specs(dataset, dist.space(), config), config);
}

std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> values) {
  if (values.empty()) throw InputError("cannot build an empirical CDF from no values");
  std::sort(values.begin(), values.end());
  std::vector<std::pair<double, double>> out;
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    out.emplace_back(values[i], static_cast<double>(i + 1) / n);
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw InputError("cannot take the median of no values");
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

std::vector<InstanceSpec> three_stage_specs(const std::string& dataset, const FeatureSpace& space,
                                            const SweepConfig& config) {
  if (space.size() < 4) throw InputError("the three-stage study needs at least four features");
  validate_config(config, 3);
  const auto grid = alpha_grid(config.alpha_k, config.grid_step);
  std::vector<InstanceSpec> out;
  for (Criterion criterion : config.criteria) {
    for (const auto& set : subsets(space.size(), 4)) {
      for (std::size_t s = 0; s < 4; ++s) {
        std::vector<std::size_t> order;
        for (std::size_t j = 0; j < 4; ++j) {
          if (j != s) order.push_back(set[j]);
        }
        do {
          for (std::size_t i1 = 0; i1 < grid.size(); ++i1) {
            for (std::size_t i2 = 0; i2 <= i1; ++i2) {
              for (std::size_t p = 1; p <= 3; ++p) {
                InstanceSpec spec;
                spec.dataset = dataset;
                spec.combination = "set:" + space.name(set[0]) + "+" + space.name(set[1]) + "+" +
                                   space.name(set[2]) + "+" + space.name(set[3]);
                spec.stages = {{space.name(order[0])}, {space.name(order[1])}, {space.name(order[2])}};
                spec.sensitive = space.name(set[s]);
                spec.placement = SensitivePlacement::at_stage(p);
                spec.alphas = {grid[i1], grid[i2], config.alpha_k};
                spec.criterion = criterion;
                out.push_back(std::move(spec));
              }
            }
          }
        } while (std::next_permutation(order.begin(), order.end()));
      }
    }
  }
  return out;
}

ThreeStageResult three_stage_study(const std::string& dataset, const JointDistribution& dist,
                                   const SweepConfig& config) {
  const auto specs = three_stage_specs(dataset, dist.space(), config);
  ThreeStageResult result;
  result.sweep = run_instances(dist, specs, config);
  // Placements 1..3 are the innermost loop, so every instance is a run of three rows.
  for (std::size_t r = 0; r + 2 < result.sweep.rows.size(); r += 3) {
    const auto& spec = result.sweep.rows[r].spec;
    ThreeStageRow joint;
    joint.dataset = spec.dataset;
    joint.criterion = spec.criterion;
    for (const auto& st : spec.stages) joint.order.push_back(st.front());
    joint.sensitive = spec.sensitive;
    joint.alphas = spec.alphas;
    for (std::size_t p = 0; p < 3; ++p) joint.polf[p] = result.sweep.rows[r + p].polf;
    result.joint.push_back(std::move(joint));
  }
  return result;
}

}  // namespace msfair
