#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "splitbench/data/dataset.hpp"

namespace splitbench::data {

struct CsvColumn {
  enum class Kind { Numeric, Categorical, Label, Ignore };

  std::string name;
  Kind kind = Kind::Numeric;
  std::vector<std::string> categories;  // Categorical
  std::vector<std::string> positive;    // Label values mapped to class 1
  std::vector<std::string> negative;    // Label values mapped to class 0
  std::optional<double> min, max;       // Numeric scaling range; from data if absent
};

struct CsvSchema {
  std::vector<CsvColumn> columns;
  bool header = true;              // first data line must repeat the column names
  std::string missing = "?";       // token treated as an unknown category
  std::string comment_prefix = "|";

  std::size_t label_column() const;
};

CsvSchema load_csv_schema(const std::filesystem::path& path);
CsvSchema parse_csv_schema(const std::string& json_text);

// Strict rejects unknown categories; lenient routes them to a trailing
// "other" slot added to every categorical block.
enum class CategoryMode { Strict, Lenient };

// Feature layout follows schema order: one min-max scaled value per numeric
// column, one one-hot block per categorical column. Each categorical column
// is also recorded in Dataset::attributes. Fields are comma separated and
// whitespace trimmed; quoting is not supported. Errors carry line numbers.
Dataset parse_csv_dataset(std::istream& in, const CsvSchema& schema, CategoryMode mode,
                          const std::string& name = "csv");

Dataset load_csv_adult(const std::filesystem::path& path, const CsvSchema& schema,
                       CategoryMode mode = CategoryMode::Lenient);

}  // namespace splitbench::data
