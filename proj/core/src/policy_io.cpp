#include <fstream>

#include <json.hpp>

#include "msfair/policy.hpp"

namespace msfair {

using nlohmann::json;

namespace {

std::string prefix_bits(std::size_t prefix, std::size_t length) {
  std::string bits(length, '0');
  for (std::size_t i = 0; i < length; ++i) bits[i] = ((prefix >> i) & 1u) ? '1' : '0';
  return bits;
}

std::size_t parse_bits(const std::string& bits) {
  std::size_t v = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') v |= std::size_t{1} << i;
    else if (bits[i] != '0') throw InputError("policy prefix '" + bits + "' is not a bit string");
  }
  return v;
}

json group_pair(const std::array<double, 2>& v) { return json::array({v[0], v[1]}); }

json evaluation_json(const PolicyEvaluation& e) {
  json doc;
  doc["precision"] = e.precision;
  doc["selected"] = e.selected;
  json stages = json::array();
  for (std::size_t i = 0; i < e.selected.size(); ++i) {
    stages.push_back({{"stage", i + 1},
                      {"dp_rate", group_pair(e.dp_rate[i])},
                      {"eo_rate", group_pair(e.eo_rate[i])},
                      {"dp_gap", e.dp_gap[i]},
                      {"eo_gap", e.eo_gap[i]}});
  }
  doc["stages"] = std::move(stages);
  return doc;
}

}  // namespace

void write_policy(std::ostream& out, const PolicyDocument& doc) {
  const auto& plan = doc.result.policy.plan;
  json j;
  j["features"] = doc.features;
  j["plan"] = {{"cuts", plan.cuts},
               {"sensitive", doc.features.at(plan.sensitive)},
               {"sensitive_index", plan.sensitive},
               {"placement", plan.placement.label()}};
  j["budgets"] = doc.budgets.alphas;
  j["criterion"] = std::string(to_string(doc.fairness.criterion));
  j["scope"] = std::string(to_string(doc.fairness.scope));
  j["status"] = std::string(lp::to_string(doc.result.solution.status));
  j["utility"] = doc.result.utility;
  j["iterations"] = doc.result.solution.iterations;

  json stages = json::array();
  for (std::size_t i = 0; i < plan.stages(); ++i) {
    json table = json::array();
    for (std::size_t q = 0; q < plan.prefix_count(i); ++q) {
      table.push_back({{"prefix", prefix_bits(q, plan.cuts[i])},
                       {"cumulative", doc.result.policy.cumulative[i][q]},
                       {"conditional", doc.result.policy.conditional[i][q]}});
    }
    std::vector<std::string> observed(doc.features.begin(),
                                      doc.features.begin() + static_cast<std::ptrdiff_t>(plan.cuts[i]));
    stages.push_back({{"stage", i + 1}, {"features", observed}, {"table", std::move(table)}});
  }
  j["stages"] = std::move(stages);
  j["warnings"] = doc.result.warnings;
  if (doc.evaluation) j["evaluation"] = evaluation_json(*doc.evaluation);
  out << j.dump(2) << '\n';
}

void write_policy_file(const std::string& path, const PolicyDocument& doc) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write policy file '" + path + "'");
  write_policy(out, doc);
}

LoadedPolicy read_policy(std::istream& in) {
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError(std::string("policy file is not valid JSON: ") + e.what());
  }
  try {
    LoadedPolicy out;
    out.features = j.at("features").get<std::vector<std::string>>();
    const auto& p = j.at("plan");
    StagePlan plan;
    plan.cuts = p.at("cuts").get<std::vector<std::size_t>>();
    plan.sensitive = p.at("sensitive_index").get<std::size_t>();
    plan.placement = SensitivePlacement::parse(p.at("placement").get<std::string>());
    out.budgets.alphas = j.at("budgets").get<std::vector<double>>();
    out.fairness.criterion = parse_criterion(j.at("criterion").get<std::string>());
    out.fairness.scope = parse_scope(j.at("scope").get<std::string>());
    out.utility = j.at("utility").get<double>();

    std::vector<std::vector<double>> cumulative(plan.stages());
    std::vector<std::vector<double>> conditional(plan.stages());
    const auto& stages = j.at("stages");
    if (stages.size() != plan.stages()) throw InputError("policy file stage tables do not match the plan");
    for (std::size_t i = 0; i < plan.stages(); ++i) {
      cumulative[i].assign(plan.prefix_count(i), 0.0);
      conditional[i].assign(plan.prefix_count(i), 0.0);
      for (const auto& entry : stages[i].at("table")) {
        const auto q = parse_bits(entry.at("prefix").get<std::string>());
        if (q >= plan.prefix_count(i)) throw InputError("policy prefix out of range");
        cumulative[i][q] = entry.at("cumulative").get<double>();
        conditional[i][q] = entry.at("conditional").get<double>();
      }
    }
    out.policy = Policy{plan, std::move(cumulative), std::move(conditional)};
    if (auto v = validate_policy(out.policy, 1e-9)) throw InputError("policy file is inconsistent: " + v->message);
    return out;
  } catch (const json::exception& e) {
    throw InputError(std::string("policy file has a malformed field: ") + e.what());
  }
}

LoadedPolicy read_policy_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open policy file '" + path + "'");
  return read_policy(in);
}

}  // namespace msfair
