#include <charconv>
#include <fstream>
#include <map>
#include <tuple>

#include <boost/tokenizer.hpp>
#include <json.hpp>

#include "msfair/format.hpp"
#include "msfair/harness.hpp"
#include "msfair/svg.hpp"

namespace msfair {

const char* const kResultsHeader =
    "dataset,criterion,combination,stage_features,sensitive,placement,alphas,u_un,u_gf,u_lf,polf,polf_bound,volf,"
    "volf_stages,warnings";

namespace {

namespace fs = std::filesystem;

std::string stage_features(const InstanceSpec& s) {
  std::string out;
  for (std::size_t i = 0; i < s.stages.size(); ++i) {
    if (i) out += '|';
    for (std::size_t j = 0; j < s.stages[i].size(); ++j) {
      if (j) out += '+';
      out += s.stages[i][j];
    }
  }
  return out;
}

std::string joined(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory '" + dir.string() + "'");
}

using GroupKey = std::tuple<std::string, std::string, std::string>;  // dataset, criterion, placement

std::map<GroupKey, std::vector<const SweepRow*>> group_rows(const std::vector<SweepRow>& rows) {
  std::map<GroupKey, std::vector<const SweepRow*>> groups;
  for (const auto& r : rows) {
    groups[{r.spec.dataset, std::string(to_string(r.spec.criterion)), r.spec.placement.label()}].push_back(&r);
  }
  return groups;
}

std::string group_label(const GroupKey& k) {
  return std::get<0>(k) + " " + std::get<1>(k) + " " + std::get<2>(k);
}

void write_cdf_csv(std::ostream& out, const std::map<GroupKey, std::vector<double>>& values) {
  out << "dataset,criterion,placement,value,fraction\n";
  for (const auto& [key, vals] : values) {
    for (const auto& [v, f] : empirical_cdf(vals)) {
      out << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ',' << format_double(v) << ','
          << format_double(f) << '\n';
    }
  }
}

PlotSpec cdf_plot(const std::string& title, const std::string& x_label,
                  const std::map<GroupKey, std::vector<double>>& values) {
  PlotSpec plot{title, x_label, "fraction of instances <= x", {}};
  for (const auto& [key, vals] : values) {
    plot.series.push_back({group_label(key), empirical_cdf(vals), PlotSeries::Style::Step});
  }
  return plot;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = text.find(sep, start);
    out.push_back(text.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) throw InputError("'" + text + "' is not a number");
  return v;
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  for (const auto& part : split(text, ';')) out.push_back(parse_double(part));
  return out;
}

void write_svg_file(const fs::path& path, const PlotSpec& plot) {
  auto out = open_output(path);
  write_svg_plot(out, plot);
}

}  // namespace

void write_results_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kResultsHeader << '\n';
  for (const auto& r : rows) {
    const auto& s = r.spec;
    out << csv_field(s.dataset) << ',' << to_string(s.criterion) << ',' << csv_field(s.combination) << ','
        << csv_field(stage_features(s)) << ',' << csv_field(s.sensitive) << ',' << s.placement.label() << ','
        << join_doubles(s.alphas, ';') << ',' << format_double(r.u_un) << ',' << format_double(r.u_gf) << ','
        << format_double(r.u_lf) << ',' << format_double(r.polf) << ',' << format_double(r.polf_bound) << ','
        << format_double(r.volf) << ',' << join_doubles(r.volf_stages, ';') << ','
        << csv_field(joined(r.warnings, ';')) << '\n';
  }
}

std::vector<SweepRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("results file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsHeader) throw InputError("results file header does not match the expected columns");
  std::vector<SweepRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    try {
      const boost::escaped_list_separator<char> sep('\0', ',', '"');
      boost::tokenizer<boost::escaped_list_separator<char>> tok(line, sep);
      f.assign(tok.begin(), tok.end());
    } catch (const boost::escaped_list_error& e) {
      throw InputError("results line " + std::to_string(line_no) + ": " + e.what());
    }
    if (f.size() != 15) {
      throw InputError("results line " + std::to_string(line_no) + " has " + std::to_string(f.size()) + " fields");
    }
    try {
      SweepRow r;
      r.spec.dataset = f[0];
      r.spec.criterion = parse_criterion(f[1]);
      r.spec.combination = f[2];
      for (const auto& stage : split(f[3], '|')) r.spec.stages.push_back(split(stage, '+'));
      r.spec.sensitive = f[4];
      r.spec.placement = SensitivePlacement::parse(f[5]);
      r.spec.alphas = parse_doubles(f[6]);
      r.u_un = parse_double(f[7]);
      r.u_gf = parse_double(f[8]);
      r.u_lf = parse_double(f[9]);
      r.polf = parse_double(f[10]);
      r.polf_bound = parse_double(f[11]);
      r.volf = parse_double(f[12]);
      r.volf_stages = parse_doubles(f[13]);
      r.warnings = split(f[14], ';');
      rows.push_back(std::move(r));
    } catch (const InputError& e) {
      throw InputError("results line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

void write_three_stage_csv(std::ostream& out, const std::vector<ThreeStageRow>& rows) {
  out << "dataset,criterion,stage_features,sensitive,alphas,polf1,polf2,polf3\n";
  for (const auto& r : rows) {
    out << csv_field(r.dataset) << ',' << to_string(r.criterion) << ',' << csv_field(joined(r.order, '|')) << ','
        << csv_field(r.sensitive) << ',' << join_doubles(r.alphas, ';') << ',' << format_double(r.polf[0]) << ','
        << format_double(r.polf[1]) << ',' << format_double(r.polf[2]) << '\n';
  }
}

void emit_outputs(const fs::path& dir, const std::vector<SweepRow>& rows, const EmitOptions& options) {
  if (rows.empty()) throw InputError("no rows to emit");
  prepare_dir(dir);
  {
    auto out = open_output(dir / "results.csv");
    write_results_csv(out, rows);
  }

  const auto groups = group_rows(rows);
  std::map<GroupKey, std::vector<double>> polf_values, volf_values;
  for (const auto& [key, members] : groups) {
    for (const auto* r : members) {
      polf_values[key].push_back(r->polf);
      volf_values[key].push_back(r->volf);
    }
  }
  {
    auto out = open_output(dir / "cdf_polf.csv");
    write_cdf_csv(out, polf_values);
  }
  {
    auto out = open_output(dir / "cdf_volf.csv");
    write_cdf_csv(out, volf_values);
  }
  {
    auto out = open_output(dir / "scatter.csv");
    out << "dataset,criterion,placement,polf,volf\n";
    for (const auto& [key, members] : groups) {
      for (const auto* r : members) {
        out << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ','
            << format_double(r->polf) << ',' << format_double(r->volf) << '\n';
      }
    }
  }

  nlohmann::json summary;
  summary["rows"] = rows.size();
  if (!options.header_note.empty()) summary["note"] = options.header_note;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [key, members] : groups) {
    const auto& p = polf_values.at(key);
    const auto& v = volf_values.at(key);
    list.push_back({{"dataset", std::get<0>(key)},
                    {"criterion", std::get<1>(key)},
                    {"placement", std::get<2>(key)},
                    {"count", members.size()},
                    {"median_polf", median(p)},
                    {"max_polf", *std::max_element(p.begin(), p.end())},
                    {"median_volf", median(v)},
                    {"max_volf", *std::max_element(v.begin(), v.end())}});
  }
  summary["groups"] = std::move(list);
  {
    auto out = open_output(dir / "summary.json");
    out << summary.dump(2) << '\n';
  }

  if (options.svg) {
    write_svg_file(dir / "cdf_polf.svg", cdf_plot("Empirical CDF of PoLF", "PoLF", polf_values));
    write_svg_file(dir / "cdf_volf.svg", cdf_plot("Empirical CDF of VoLF", "VoLF", volf_values));
    PlotSpec scatter{"PoLF against VoLF", "VoLF", "PoLF", {}};
    for (const auto& [key, members] : groups) {
      PlotSeries s{group_label(key), {}, PlotSeries::Style::Markers};
      for (const auto* r : members) s.points.emplace_back(r->volf, r->polf);
      scatter.series.push_back(std::move(s));
    }
    write_svg_file(dir / "scatter.svg", scatter);
  }
}

void emit_sweep(const fs::path& dir, const std::vector<SweepRow>& rows, const EmitOptions& options) {
  if (rows.empty()) throw InputError("no rows to emit");
  prepare_dir(dir);
  {
    auto out = open_output(dir / "sweep.csv");
    write_results_csv(out, rows);
  }
  if (!options.svg) return;
  PlotSpec plot{"Optimal precision against alpha_1", "alpha_1", "precision", {}};
  const auto groups = group_rows(rows);
  const bool tag = groups.size() > 1;
  for (const auto& [key, members] : groups) {
    const std::string suffix = tag ? " (" + group_label(key) + ")" : "";
    PlotSeries un{"unconstrained" + suffix, {}, PlotSeries::Style::Line};
    PlotSeries gf{"global fair" + suffix, {}, PlotSeries::Style::Line};
    PlotSeries lf{"local fair" + suffix, {}, PlotSeries::Style::Line};
    for (const auto* r : members) {
      const double a1 = r->spec.alphas.front();
      un.points.emplace_back(a1, r->u_un);
      gf.points.emplace_back(a1, r->u_gf);
      lf.points.emplace_back(a1, r->u_lf);
    }
    plot.series.push_back(std::move(un));
    plot.series.push_back(std::move(gf));
    plot.series.push_back(std::move(lf));
  }
  write_svg_file(dir / "sweep.svg", plot);
}

void emit_three_stage(const fs::path& dir, const ThreeStageResult& result, const EmitOptions& options) {
  if (result.joint.empty()) throw InputError("no rows to emit");
  prepare_dir(dir);
  {
    auto out = open_output(dir / "three_stage.csv");
    write_three_stage_csv(out, result.joint);
  }
  {
    auto out = open_output(dir / "three_stage_results.csv");
    write_results_csv(out, result.sweep.rows);
  }
  std::map<GroupKey, std::vector<double>> polf_values;
  for (const auto& r : result.joint) {
    for (std::size_t p = 0; p < 3; ++p) {
      polf_values[{r.dataset, std::string(to_string(r.criterion)), "stage" + std::to_string(p + 1)}].push_back(
          r.polf[p]);
    }
  }
  {
    auto out = open_output(dir / "three_stage_cdf.csv");
    write_cdf_csv(out, polf_values);
  }
  nlohmann::json summary;
  summary["instances"] = result.joint.size();
  if (!options.header_note.empty()) summary["note"] = options.header_note;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [key, vals] : polf_values) {
    list.push_back({{"dataset", std::get<0>(key)},
                    {"criterion", std::get<1>(key)},
                    {"placement", std::get<2>(key)},
                    {"median_polf", median(vals)},
                    {"max_polf", *std::max_element(vals.begin(), vals.end())}});
  }
  summary["groups"] = std::move(list);
  {
    auto out = open_output(dir / "three_stage_summary.json");
    out << summary.dump(2) << '\n';
  }
  if (!options.svg) return;
  write_svg_file(dir / "three_stage_cdf.svg",
                 cdf_plot("Empirical CDF of PoLF by reveal stage", "PoLF", polf_values));
  PlotSpec scatter{"PoLF for pairs of reveal stages", "PoLF, earlier stage", "PoLF, later stage", {}};
  const std::array<std::pair<std::size_t, std::size_t>, 3> pairs{{{0, 1}, {1, 2}, {0, 2}}};
  for (const auto& [a, b] : pairs) {
    PlotSeries s{"stage " + std::to_string(a + 1) + " vs " + std::to_string(b + 1), {}, PlotSeries::Style::Markers};
    for (const auto& r : result.joint) s.points.emplace_back(r.polf[a], r.polf[b]);
    scatter.series.push_back(std::move(s));
  }
  write_svg_file(dir / "three_stage_scatter.svg", scatter);
}

}  // namespace msfair
