#include <fstream>

#include <json.hpp>

#include "msfair/model.hpp"

namespace msfair {

using nlohmann::json;

JointDistribution read_distribution(std::istream& in) {
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw InputError(std::string("distribution file is not valid JSON: ") + e.what());
  }
  for (const char* key : {"features", "mass", "positive"}) {
    if (!doc.contains(key)) throw InputError(std::string("distribution file lacks field '") + key + "'");
  }
  try {
    auto names = doc.at("features").get<std::vector<std::string>>();
    auto mass = doc.at("mass").get<std::vector<double>>();
    auto positive = doc.at("positive").get<std::vector<double>>();
    return JointDistribution(FeatureSpace(std::move(names)), std::move(mass), std::move(positive));
  } catch (const json::exception& e) {
    throw InputError(std::string("distribution file has a malformed field: ") + e.what());
  }
}

JointDistribution read_distribution_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open distribution file '" + path + "'");
  return read_distribution(in);
}

void write_distribution(std::ostream& out, const JointDistribution& dist) {
  json doc;
  doc["features"] = dist.space().names();
  doc["mass"] = std::vector<double>(dist.mass().begin(), dist.mass().end());
  doc["positive"] = std::vector<double>(dist.positive().begin(), dist.positive().end());
  out << doc.dump(2) << '\n';
}

void write_distribution_file(const std::string& path, const JointDistribution& dist) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write distribution file '" + path + "'");
  write_distribution(out, dist);
}

}  // namespace msfair
