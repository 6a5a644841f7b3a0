#include "msfair/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ostream>
#include <thread>

#include "msfair/format.hpp"

namespace msfair {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string prefix_bits(std::size_t prefix, std::size_t length) {
  std::string bits(length, '0');
  for (std::size_t i = 0; i < length; ++i) bits[i] = ((prefix >> i) & 1u) ? '1' : '0';
  return bits;
}

void check_policy(const Policy& policy, const StagePlan& plan) {
  if (policy.conditional.size() != plan.stages()) throw InputError("policy does not match the plan");
  for (std::size_t i = 0; i < plan.stages(); ++i) {
    if (policy.conditional[i].size() != plan.prefix_count(i)) throw InputError("policy does not match the plan");
  }
}

}  // namespace

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t state = seed;
  const std::uint64_t a = splitmix64(state);
  state = a ^ (stream * 0xd1342543de82ef95ULL + 1);
  return std::mt19937_64(splitmix64(state));
}

double uniform01(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

std::vector<Candidate> sample_cohort(const JointDistribution& dist, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InputError("cohort size must be at least 1");
  std::vector<double> cdf(dist.cell_count());
  double acc = 0.0;
  for (CellIndex c = 0; c < dist.cell_count(); ++c) cdf[c] = (acc += dist.mass(c));
  // Draws above the rounded total land on the last cell with positive mass.
  CellIndex last = 0;
  for (CellIndex c = 0; c < dist.cell_count(); ++c) {
    if (dist.mass(c) > 0.0) last = c;
  }

  auto gen = make_stream(seed, 0);
  std::vector<Candidate> out(n);
  for (auto& cand : out) {
    const double u = uniform01(gen) * acc;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    cand.cell = it == cdf.end() ? last : static_cast<CellIndex>(it - cdf.begin());
    cand.label = static_cast<std::uint8_t>(uniform01(gen) < dist.positive(cand.cell));
  }
  return out;
}

CohortResult run_policy(std::span<const Candidate> cohort, const Policy& policy, const StagePlan& plan,
                        std::uint64_t seed, const RunOptions& options) {
  check_policy(policy, plan);
  const std::size_t k = plan.stages();
  if (options.clip_to_quota && options.alphas.size() != k) throw InputError("clipping needs one budget per stage");

  CohortResult r;
  r.n = cohort.size();
  r.seed = seed;
  r.counts.resize(k);
  for (std::size_t i = 0; i < k; ++i) r.counts[i].assign(plan.prefix_count(i), 0);

  auto gen = make_stream(seed, 1);
  std::vector<std::size_t> alive(cohort.size());
  for (std::size_t j = 0; j < alive.size(); ++j) alive[j] = j;
  std::vector<std::size_t> next;
  for (std::size_t i = 0; i < k; ++i) {
    next.clear();
    for (std::size_t j : alive) {
      const double p = policy.conditional[i][prefix_of(cohort[j].cell, plan.cuts[i])];
      if (uniform01(gen) < p) next.push_back(j);
    }
    if (options.clip_to_quota) {
      const auto quota = static_cast<std::size_t>(std::llround(options.alphas[i] * static_cast<double>(r.n)));
      if (next.size() > quota) {
        // Partial Fisher-Yates written out so the stream is not tied to a
        // library's shuffle implementation.
        for (std::size_t a = 0; a < quota; ++a) {
          const auto b = a + static_cast<std::size_t>(uniform01(gen) * static_cast<double>(next.size() - a));
          std::swap(next[a], next[std::min(b, next.size() - 1)]);
        }
        next.resize(quota);
        std::sort(next.begin(), next.end());
      }
    }
    alive.swap(next);
    for (std::size_t j : alive) ++r.counts[i][prefix_of(cohort[j].cell, plan.cuts[i])];
    r.selected.push_back(alive.size());
    r.budget_fraction.push_back(r.n ? static_cast<double>(alive.size()) / static_cast<double>(r.n) : 0.0);
  }
  for (std::size_t j : alive) r.selected_positive += cohort[j].label;
  if (!alive.empty()) r.precision = static_cast<double>(r.selected_positive) / static_cast<double>(alive.size());
  return r;
}

ExpectedQuantities expected_quantities(const JointDistribution& dist, const Policy& policy, const StagePlan& plan) {
  check_policy(policy, plan);
  const std::size_t k = plan.stages();
  ExpectedQuantities e;
  e.prefix_fraction.resize(k);
  for (std::size_t i = 0; i < k; ++i) e.prefix_fraction[i].assign(plan.prefix_count(i), 0.0);
  e.budget_fraction.assign(k, 0.0);
  double positive_selected = 0.0;
  for (CellIndex c = 0; c < dist.cell_count(); ++c) {
    const double m = dist.mass(c);
    if (m == 0.0) continue;
    double through = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      through *= policy.conditional[i][prefix_of(c, plan.cuts[i])];
      e.prefix_fraction[i][prefix_of(c, plan.cuts[i])] += m * through;
      e.budget_fraction[i] += m * through;
    }
    positive_selected += m * dist.positive(c) * through;
  }
  e.precision = e.budget_fraction.back() > 0.0 ? positive_selected / e.budget_fraction.back() : 0.0;
  return e;
}

ConvergenceStudy convergence_study(const JointDistribution& dist, const Policy& policy, const StagePlan& plan,
                                   std::span<const std::size_t> n_grid, std::size_t replications, std::uint64_t seed,
                                   const ConvergenceOptions& options) {
  if (n_grid.empty() || replications == 0) throw InputError("convergence study needs sizes and replications");
  for (std::size_t g = 1; g < n_grid.size(); ++g) {
    if (n_grid[g] <= n_grid[g - 1]) throw InputError("cohort sizes must be increasing");
  }
  const auto expected = expected_quantities(dist, policy, plan);
  const std::size_t k = plan.stages();

  const std::size_t tasks = n_grid.size() * replications;
  std::vector<CohortResult> results(tasks);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      const std::size_t g = t / replications, rep = t % replications;
      std::uint64_t state = seed ^ (static_cast<std::uint64_t>(n_grid[g]) << 20) ^ rep;
      const std::uint64_t task_seed = splitmix64(state);
      const auto cohort = sample_cohort(dist, n_grid[g], task_seed);
      results[t] = run_policy(cohort, policy, plan, task_seed, options.run);
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < std::max<std::size_t>(1, options.threads); ++w) pool.emplace_back(work);
    work();
  }

  ConvergenceStudy study;
  study.seed = seed;
  for (std::size_t g = 0; g < n_grid.size(); ++g) {
    for (std::size_t rep = 0; rep < replications; ++rep) {
      const auto& r = results[g * replications + rep];
      const double n = static_cast<double>(r.n);
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t q = 0; q < r.counts[i].size(); ++q) {
          const double realized = static_cast<double>(r.counts[i][q]) / n;
          const double exp = expected.prefix_fraction[i][q];
          study.rows.push_back({r.n, rep, i + 1, "prefix:" + prefix_bits(q, plan.cuts[i]), realized, exp,
                                realized - exp});
        }
        const double b = r.budget_fraction[i];
        study.rows.push_back({r.n, rep, i + 1, "budget", b, expected.budget_fraction[i],
                              b - expected.budget_fraction[i]});
      }
      std::optional<double> dev;
      if (r.precision) dev = *r.precision - expected.precision;
      study.rows.push_back({r.n, rep, k, "precision", r.precision, expected.precision, dev});
    }
  }

  // Series: per stage prefix_l1 and budget, plus final precision.
  const auto add_series = [&](std::size_t stage, const std::string& name, auto&& deviation_of) {
    ConvergenceSeries s;
    s.stage = stage;
    s.quantity = name;
    for (std::size_t g = 0; g < n_grid.size(); ++g) {
      ConvergencePoint p;
      p.n = n_grid[g];
      double sum = 0.0;
      for (std::size_t rep = 0; rep < replications; ++rep) {
        if (auto d = deviation_of(results[g * replications + rep])) {
          sum += std::abs(*d);
          ++p.samples;
        }
      }
      p.mean_abs_deviation = p.samples ? sum / static_cast<double>(p.samples) : 0.0;
      s.points.push_back(p);
    }
    const bool fit = std::all_of(s.points.begin(), s.points.end(),
                                 [](const ConvergencePoint& p) { return p.samples > 0 && p.mean_abs_deviation > 0.0; });
    if (fit && s.points.size() >= 2) {
      std::vector<double> xs, ys;
      for (const auto& p : s.points) {
        xs.push_back(static_cast<double>(p.n));
        ys.push_back(p.mean_abs_deviation);
      }
      s.slope = loglog_slope(xs, ys);
    }
    study.series.push_back(std::move(s));
  };
  for (std::size_t i = 0; i < k; ++i) {
    add_series(i + 1, "prefix_l1", [&](const CohortResult& r) -> std::optional<double> {
      double l1 = 0.0;
      for (std::size_t q = 0; q < r.counts[i].size(); ++q) {
        l1 += std::abs(static_cast<double>(r.counts[i][q]) / static_cast<double>(r.n) - expected.prefix_fraction[i][q]);
      }
      return l1;
    });
    add_series(i + 1, "budget", [&](const CohortResult& r) -> std::optional<double> {
      return r.budget_fraction[i] - expected.budget_fraction[i];
    });
  }
  add_series(k, "precision", [&](const CohortResult& r) -> std::optional<double> {
    if (!r.precision) return std::nullopt;
    return *r.precision - expected.precision;
  });
  return study;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("slope fit needs at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InputError("log-log fit needs positive values");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw InputError("slope fit needs distinct x values");
  return sxy / sxx;
}

void write_convergence_csv(std::ostream& out, const ConvergenceStudy& study) {
  out << "n,rep,stage,quantity,realized,expected,deviation\n";
  for (const auto& r : study.rows) {
    out << r.n << ',' << r.rep << ',' << r.stage << ',' << r.quantity << ','
        << (r.realized ? format_double(*r.realized) : "") << ',' << format_double(r.expected) << ','
        << (r.deviation ? format_double(*r.deviation) : "") << '\n';
  }
}

}  // namespace msfair
