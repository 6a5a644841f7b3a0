#include "msfair/datasets.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <fstream>
#include <unordered_map>

#include <boost/tokenizer.hpp>
#include <json.hpp>

namespace msfair {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double number(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw FieldError("'" + std::string(s) + "' is not a number");
  return v;
}

bool one_of(std::string_view s, std::initializer_list<std::string_view> values) {
  return std::find(values.begin(), values.end(), s) != values.end();
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// "YYYY-MM-DD HH:MM:SS" as seconds since the epoch.
double timestamp_seconds(std::string_view s) {
  s = trim(s);
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || s[13] != ':' || s[16] != ':') {
    throw FieldError("'" + std::string(s) + "' is not a timestamp");
  }
  const auto part = [&](std::size_t pos, std::size_t len) { return static_cast<int>(number(s.substr(pos, len))); };
  using namespace std::chrono;
  const year_month_day date{year{part(0, 4)}, month{static_cast<unsigned>(part(5, 2))},
                            day{static_cast<unsigned>(part(8, 2))}};
  if (!date.ok()) throw FieldError("'" + std::string(s) + "' is not a valid date");
  const auto days_since = sys_days{date}.time_since_epoch().count();
  return static_cast<double>(days_since) * 86400.0 + part(11, 2) * 3600.0 + part(14, 2) * 60.0 + part(17, 2);
}

ColumnRule rule(std::string name, std::vector<std::string> columns, std::string description,
                std::function<bool(std::span<const std::string_view>)> predicate) {
  return ColumnRule{std::move(name), std::move(columns), std::move(description), std::move(predicate)};
}

BinarizationRecipe make_adult() {
  BinarizationRecipe r;
  r.id = "adult";
  r.format = RawFormat::Csv;
  r.default_columns = {"age",          "workclass",    "fnlwgt",       "education",     "education-num",
                       "marital-status", "occupation", "relationship", "race",          "sex",
                       "capital-gain", "capital-loss", "hours-per-week", "native-country", "income"};
  r.features = {
      rule("sex", {"sex"}, "sex = Male", [](auto v) { return v[0] == "Male"; }),
      rule("age", {"age"}, "age > 35", [](auto v) { return number(v[0]) > 35; }),
      rule("country", {"native-country"}, "native-country in EU or US",
           [](auto v) {
             return one_of(v[0], {"United-States", "Outlying-US(Guam-USVI-etc)", "England", "Scotland", "Germany",
                                  "Greece", "Italy", "Poland", "Portugal", "Ireland", "France", "Hungary",
                                  "Holand-Netherlands"});
           }),
      rule("education", {"education"}, "education in {Bachelors, Masters}",
           [](auto v) { return one_of(v[0], {"Bachelors", "Masters"}); }),
      rule("hours", {"hours-per-week"}, "hours-per-week > 35", [](auto v) { return number(v[0]) > 35; }),
      rule("relationship", {"relationship"}, "relationship in {Husband, Wife}",
           [](auto v) { return one_of(v[0], {"Husband", "Wife"}); }),
  };
  r.label = rule("label", {"income"}, "income > 50K", [](auto v) {
    if (v[0] == ">50K" || v[0] == ">50K.") return true;
    if (v[0] == "<=50K" || v[0] == "<=50K.") return false;
    throw FieldError("unknown income value '" + std::string(v[0]) + "'");
  });
  r.label_note = "y=1 <=> income > 50K; adult.data and adult.test concatenated when both are given";
  r.raw_files = {"adult.data", "adult.test"};
  return r;
}

const std::array<std::string_view, 36> kDrugKeywords = {
    "drug",          "cocaine",      "cannabis",     "heroin",        "amphetamine",    "methylenediox",
    "methylethcathinone", "mdma",   "ethylone",     "butylone",      "oxycodone",      "hydromorphone",
    "hydrocodone",   "morphine",     "codeine",      "methadone",     "fentanyl",       "alprazolam",
    "clonazepam",    "lorazepam",    "carisoprodol", "buprenorphine", "phentermine",    "amobarbital",
    "benzylpiperazine", "trifluoromethylphenylpipe", "steroid", "lsd", "xlr11",        "jwh-",
    "contr sub",     "control sub",  "controlled sub", "cont subs",   "cont substance", "contrft schd"};

BinarizationRecipe make_compas() {
  BinarizationRecipe r;
  r.id = "compas";
  r.format = RawFormat::Csv;
  r.filters = {rule("race", {"race"}, "race in {Caucasian, African-American}",
                    [](auto v) { return one_of(v[0], {"Caucasian", "African-American"}); })};
  r.features = {
      rule("sex", {"sex"}, "sex = Male", [](auto v) { return v[0] == "Male"; }),
      rule("young", {"age"}, "age < 25", [](auto v) { return number(v[0]) < 25; }),
      rule("old", {"age"}, "age > 45", [](auto v) { return number(v[0]) > 45; }),
      rule("long_sentence", {"c_jail_in", "c_jail_out"}, "c_jail_out - c_jail_in > 30 days (missing = 0)",
           [](auto v) {
             if (trim(v[0]).empty() || trim(v[1]).empty()) return false;
             return (timestamp_seconds(v[1]) - timestamp_seconds(v[0])) / 86400.0 > 30.0;
           }),
      rule("drugs", {"c_charge_desc"}, "charge description mentions a drug keyword",
           [](auto v) {
             const auto desc = lower(v[0]);
             return std::any_of(kDrugKeywords.begin(), kDrugKeywords.end(),
                                [&](std::string_view k) { return desc.find(k) != std::string::npos; });
           }),
      rule("race", {"race"}, "race = Caucasian", [](auto v) { return v[0] == "Caucasian"; }),
  };
  r.label = rule("label", {"two_year_recid"}, "two_year_recid = 1", [](auto v) {
    const double x = number(v[0]);
    if (x != 0.0 && x != 1.0) throw FieldError("two_year_recid is not 0/1");
    return x == 1.0;
  });
  r.label_note = "y=1 <=> two_year_recid = 1 (reoffended within two years)";
  r.raw_files = {"compas-scores-two-years.csv"};
  return r;
}

BinarizationRecipe make_german() {
  BinarizationRecipe r;
  r.id = "german";
  r.format = RawFormat::Whitespace;
  r.default_columns = {"checking_status",   "duration",        "credit_history", "purpose",
                       "credit_amount",     "savings",         "employment",     "installment_rate",
                       "personal_status",   "other_debtors",   "residence_since", "property",
                       "age",               "other_installments", "housing",    "existing_credits",
                       "job",               "people_liable",   "telephone",      "foreign_worker",
                       "class"};
  r.features = {
      rule("job", {"job"}, "job != A171 (not unemployed)", [](auto v) { return v[0] != "A171"; }),
      rule("housing", {"housing"}, "housing = A152 (own)", [](auto v) { return v[0] == "A152"; }),
      rule("sex", {"personal_status"}, "personal_status in {A91, A93, A94} (male)",
           [](auto v) { return one_of(v[0], {"A91", "A93", "A94"}); }),
      rule("savings", {"savings"}, "savings in {A63, A64} (>= 500 DM)",
           [](auto v) { return one_of(v[0], {"A63", "A64"}); }),
      rule("credit_history", {"credit_history"}, "credit_history in {A30, A31} (all paid duly)",
           [](auto v) { return one_of(v[0], {"A30", "A31"}); }),
      rule("age", {"age"}, "age > 50", [](auto v) { return number(v[0]) > 50; }),
  };
  r.label = rule("label", {"class"}, "class = 1 (good credit)", [](auto v) {
    const double x = number(v[0]);
    if (x != 1.0 && x != 2.0) throw FieldError("class is not 1/2");
    return x == 1.0;
  });
  r.label_note = "y=1 <=> class = 1 (loan repaid)";
  r.raw_files = {"german.data"};
  return r;
}

std::vector<std::string> split_fields(const std::string& line, RawFormat format) {
  std::vector<std::string> out;
  if (format == RawFormat::Whitespace) {
    boost::char_separator<char> sep(" \t\r");
    boost::tokenizer<boost::char_separator<char>> tok(line, sep);
    for (const auto& t : tok) out.emplace_back(t);
  } else {
    std::string body = line;
    if (!body.empty() && body.back() == '\r') body.pop_back();
    boost::escaped_list_separator<char> sep('\0', ',', '"');
    boost::tokenizer<boost::escaped_list_separator<char>> tok(body.begin(), body.end(), sep);
    try {
      for (const auto& t : tok) out.emplace_back(trim(t));
    } catch (const boost::escaped_list_error& e) {
      throw FieldError(std::string("malformed quoting: ") + e.what());
    }
  }
  return out;
}

struct BoundRule {
  const ColumnRule* rule;
  std::vector<std::size_t> indices;
};

std::vector<std::size_t> resolve(const ColumnRule& rule, const std::vector<std::string>& header,
                                 const std::string& source) {
  std::vector<std::size_t> idx;
  for (const auto& col : rule.columns) {
    // First occurrence wins: the COMPAS export repeats some column names.
    const auto it = std::find(header.begin(), header.end(), col);
    if (it == header.end()) throw InputError(source + ": missing column '" + col + "'");
    idx.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  return idx;
}

bool holds(const BoundRule& b, const std::vector<std::string>& fields) {
  std::array<std::string_view, 4> buf{};
  for (std::size_t i = 0; i < b.indices.size(); ++i) buf[i] = fields[b.indices[i]];
  return b.rule->predicate(std::span<const std::string_view>(buf.data(), b.indices.size()));
}

}  // namespace

std::vector<std::string> BinarizationRecipe::feature_names() const {
  std::vector<std::string> out;
  for (const auto& f : features) out.push_back(f.name);
  return out;
}

const BinarizationRecipe& adult_recipe() {
  static const BinarizationRecipe r = make_adult();
  return r;
}
const BinarizationRecipe& compas_recipe() {
  static const BinarizationRecipe r = make_compas();
  return r;
}
const BinarizationRecipe& german_recipe() {
  static const BinarizationRecipe r = make_german();
  return r;
}

const BinarizationRecipe& builtin_recipe(std::string_view id) {
  if (id == "adult") return adult_recipe();
  if (id == "compas") return compas_recipe();
  if (id == "german") return german_recipe();
  throw InputError("unknown dataset '" + std::string(id) + "' (expected adult, compas or german)");
}

void load_and_binarize(std::istream& in, const std::string& source_name, const BinarizationRecipe& recipe,
                       IngestResult& result, const IngestOptions& options) {
  auto& report = result.report;
  report.dataset = recipe.id;
  report.inputs.push_back(source_name);
  report.invert_label = options.invert_label;
  report.label_note = recipe.label_note + (options.invert_label ? " (inverted)" : "");
  if (result.batch.features.empty()) result.batch.features = recipe.feature_names();

  std::vector<std::string> header;
  std::vector<BoundRule> filters, features;
  BoundRule label{};
  bool bound = false;
  const auto bind = [&](const std::vector<std::string>& names) {
    for (const auto& r : recipe.filters) filters.push_back({&r, resolve(r, names, source_name)});
    for (const auto& r : recipe.features) features.push_back({&r, resolve(r, names, source_name)});
    label = {&recipe.label, resolve(recipe.label, names, source_name)};
    header = names;
    bound = true;
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    // Blank lines and the '|' banner line at the top of adult.test.
    if (body.empty() || body.front() == '|') continue;
    std::vector<std::string> fields;
    std::string split_error;
    try {
      fields = split_fields(line, recipe.format);
    } catch (const FieldError& e) {
      split_error = e.what();
    }
    if (!bound) {
      const bool has_header = std::all_of(recipe.label.columns.begin(), recipe.label.columns.end(), [&](const auto& c) {
        return std::find(fields.begin(), fields.end(), c) != fields.end();
      });
      if (has_header) {
        report.header_found = true;
        bind(fields);
        continue;
      }
      if (recipe.default_columns.empty()) throw InputError(source_name + ": no header line with the required columns");
      bind(recipe.default_columns);
    }
    ++report.lines_read;
    const auto skip = [&](const std::string& why) {
      ++report.rows_skipped;
      if (report.skip_reasons.size() < 10) {
        report.skip_reasons.push_back(source_name + ":" + std::to_string(line_no) + ": " + why);
      }
    };
    if (!split_error.empty()) {
      skip(split_error);
      continue;
    }
    if (fields.size() != header.size()) {
      skip("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
      continue;
    }
    try {
      if (!std::all_of(filters.begin(), filters.end(), [&](const BoundRule& b) { return holds(b, fields); })) {
        ++report.rows_filtered;
        continue;
      }
      Record rec;
      for (std::size_t j = 0; j < features.size(); ++j) {
        if (holds(features[j], fields)) rec.features |= std::uint32_t{1} << j;
      }
      const bool y = holds(label, fields);
      rec.label = static_cast<std::uint8_t>(y != options.invert_label);
      result.batch.rows.push_back(rec);
      ++report.rows_kept;
    } catch (const FieldError& e) {
      skip(e.what());
    }
  }
}

IngestResult load_and_binarize(std::span<const std::string> paths, const BinarizationRecipe& recipe,
                               const IngestOptions& options) {
  if (paths.empty()) throw InputError("no input files given");
  IngestResult result;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    load_and_binarize(in, path, recipe, result, options);
  }
  if (result.batch.rows.empty()) throw InputError("no rows survived ingestion of " + recipe.id);
  return result;
}

JointDistribution estimate_distribution(const RecordBatch& batch, std::span<const std::string> selected) {
  if (batch.rows.empty()) throw InputError("cannot estimate a distribution from an empty batch");
  if (selected.empty() || selected.size() > kMaxFeatures) throw InputError("select between 1 and 20 features");
  std::vector<std::size_t> source;
  for (const auto& name : selected) {
    const auto it = std::find(batch.features.begin(), batch.features.end(), name);
    if (it == batch.features.end()) throw InputError("unknown feature '" + name + "'");
    source.push_back(static_cast<std::size_t>(it - batch.features.begin()));
  }
  FeatureSpace space(std::vector<std::string>(selected.begin(), selected.end()));

  std::vector<std::uint64_t> count(space.cell_count(), 0), positives(space.cell_count(), 0);
  for (const auto& rec : batch.rows) {
    CellIndex cell = 0;
    for (std::size_t j = 0; j < source.size(); ++j) {
      if ((rec.features >> source[j]) & 1u) cell |= CellIndex{1} << j;
    }
    ++count[cell];
    positives[cell] += rec.label;
  }
  const double n = static_cast<double>(batch.rows.size());
  std::vector<double> mass(count.size()), positive(count.size());
  for (std::size_t c = 0; c < count.size(); ++c) {
    mass[c] = static_cast<double>(count[c]) / n;
    positive[c] = count[c] == 0 ? 0.0 : static_cast<double>(positives[c]) / static_cast<double>(count[c]);
  }
  return JointDistribution(std::move(space), std::move(mass), std::move(positive));
}

void write_ingest_report(std::ostream& out, const IngestReport& report, const JointDistribution& dist) {
  nlohmann::json j;
  j["dataset"] = report.dataset;
  j["inputs"] = report.inputs;
  j["header_found"] = report.header_found;
  j["lines_read"] = report.lines_read;
  j["rows_kept"] = report.rows_kept;
  j["rows_filtered"] = report.rows_filtered;
  j["rows_skipped"] = report.rows_skipped;
  j["skip_reasons"] = report.skip_reasons;
  j["label"] = report.label_note;
  j["invert_label"] = report.invert_label;
  j["positive_rate"] = dist.positive_rate();
  nlohmann::json marginals = nlohmann::json::object();
  for (std::size_t f = 0; f < dist.space().size(); ++f) {
    double p = 0.0;
    for (CellIndex c = 0; c < dist.cell_count(); ++c) {
      if (feature_bit(c, f)) p += dist.mass(c);
    }
    marginals[dist.space().name(f)] = p;
  }
  j["marginals"] = std::move(marginals);
  out << j.dump(2) << '\n';
}

}  // namespace msfair
