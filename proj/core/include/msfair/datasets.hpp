#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "msfair/model.hpp"

namespace msfair {

enum class RawFormat { Csv, Whitespace };

/// Maps the listed source columns of one raw row to a bit. Predicates throw
/// FieldError for values they cannot interpret; the row is then skipped.
struct ColumnRule {
  std::string name;  // output feature name (or "label")
  std::vector<std::string> columns;
  std::string description;
  std::function<bool(std::span<const std::string_view>)> predicate;
};

struct FieldError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BinarizationRecipe {
  std::string id;
  RawFormat format = RawFormat::Csv;
  // Column names used when the file has no header line.
  std::vector<std::string> default_columns;
  // Rows for which the filter is false are dropped (not counted as skipped).
  std::vector<ColumnRule> filters;
  std::vector<ColumnRule> features;
  ColumnRule label;
  std::string label_note;
  // File names of the public raw release, concatenated in this order.
  std::vector<std::string> raw_files;

  std::vector<std::string> feature_names() const;
};

const BinarizationRecipe& adult_recipe();
const BinarizationRecipe& compas_recipe();
const BinarizationRecipe& german_recipe();
/// "adult" | "compas" | "german"; throws InputError otherwise.
const BinarizationRecipe& builtin_recipe(std::string_view id);

struct Record {
  std::uint32_t features = 0;  // bit j = recipe feature j
  std::uint8_t label = 0;
};

struct RecordBatch {
  std::vector<std::string> features;
  std::vector<Record> rows;
};

struct IngestReport {
  std::string dataset;
  std::vector<std::string> inputs;
  std::size_t lines_read = 0;
  std::size_t rows_kept = 0;
  std::size_t rows_filtered = 0;
  std::size_t rows_skipped = 0;
  bool header_found = false;
  bool invert_label = false;
  std::string label_note;
  std::vector<std::string> skip_reasons;  // first few, for diagnostics
};

struct IngestResult {
  RecordBatch batch;
  IngestReport report;
};

struct IngestOptions {
  bool invert_label = false;
};

/// Reads one raw source into `result`, appending rows. Throws InputError if a
/// required column is missing.
void load_and_binarize(std::istream& in, const std::string& source_name, const BinarizationRecipe& recipe,
                       IngestResult& result, const IngestOptions& options = {});

/// Concatenates every input file. Throws InputError when a file cannot be
/// opened or when no row survives.
IngestResult load_and_binarize(std::span<const std::string> paths, const BinarizationRecipe& recipe,
                               const IngestOptions& options = {});

/// Empirical distribution over `selected` (recipe feature names, in order).
/// Throws InputError on an empty batch or an unknown feature.
JointDistribution estimate_distribution(const RecordBatch& batch, std::span<const std::string> selected);

/// Sidecar JSON report: row counts, label note, marginals of `dist`.
void write_ingest_report(std::ostream& out, const IngestReport& report, const JointDistribution& dist);

}  // namespace msfair
