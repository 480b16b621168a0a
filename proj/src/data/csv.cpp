#include "splitbench/data/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace splitbench::data {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

Error row_error(std::size_t line, const std::string& what) {
  return Error("malformed_row", "line " + std::to_string(line) + ": " + what);
}

CsvColumn::Kind kind_from(const std::string& s) {
  if (s == "numeric") return CsvColumn::Kind::Numeric;
  if (s == "categorical") return CsvColumn::Kind::Categorical;
  if (s == "label") return CsvColumn::Kind::Label;
  if (s == "ignore") return CsvColumn::Kind::Ignore;
  throw ConfigError("columns.type", "unknown column type '" + s + "'");
}

}  // namespace

std::size_t CsvSchema::label_column() const {
  std::optional<std::size_t> found;
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].kind == CsvColumn::Kind::Label) {
      if (found) throw ConfigError("columns", "schema declares more than one label column");
      found = i;
    }
  if (!found) throw ConfigError("columns", "schema declares no label column");
  return *found;
}

CsvSchema parse_csv_schema(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("schema", e.what());
  }
  CsvSchema s;
  s.header = j.value("header", true);
  s.missing = j.value("missing", std::string("?"));
  s.comment_prefix = j.value("comment_prefix", std::string("|"));
  for (const auto& c : j.at("columns")) {
    CsvColumn col;
    col.name = c.at("name").get<std::string>();
    col.kind = kind_from(c.at("type").get<std::string>());
    if (c.contains("values")) col.categories = c["values"].get<std::vector<std::string>>();
    if (c.contains("positive")) col.positive = c["positive"].get<std::vector<std::string>>();
    if (c.contains("negative")) col.negative = c["negative"].get<std::vector<std::string>>();
    if (c.contains("min")) col.min = c["min"].get<double>();
    if (c.contains("max")) col.max = c["max"].get<double>();
    if (col.kind == CsvColumn::Kind::Categorical && col.categories.empty())
      throw ConfigError("columns." + col.name, "categorical column needs values");
    if (col.kind == CsvColumn::Kind::Label && col.positive.empty())
      throw ConfigError("columns." + col.name, "label column needs positive values");
    s.columns.push_back(std::move(col));
  }
  s.label_column();
  return s;
}

CsvSchema load_csv_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv_schema(ss.str());
}

Dataset parse_csv_dataset(std::istream& in, const CsvSchema& schema, CategoryMode mode,
                          const std::string& name) {
  const std::size_t label_col = schema.label_column();
  const bool lenient = mode == CategoryMode::Lenient;
  const std::size_t ncols = schema.columns.size();

  // Raw numeric values first; scaling needs the column ranges.
  std::vector<std::vector<double>> numeric(ncols);
  std::vector<std::vector<std::int32_t>> category(ncols);
  std::vector<std::int32_t> labels;

  std::string line;
  std::size_t lineno = 0;
  bool header_seen = !schema.header;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (!schema.comment_prefix.empty() && t.rfind(schema.comment_prefix, 0) == 0) continue;
    auto fields = split_fields(t);
    if (!header_seen) {
      header_seen = true;
      bool ok = fields.size() == ncols;
      for (std::size_t i = 0; ok && i < ncols; ++i) ok = fields[i] == schema.columns[i].name;
      if (!ok) throw row_error(lineno, "header does not match the schema columns");
      continue;
    }
    if (fields.size() == ncols - 1 && label_col == ncols - 1)
      throw row_error(lineno, "missing label field '" + schema.columns[label_col].name + "'");
    if (fields.size() != ncols)
      throw row_error(lineno, "expected " + std::to_string(ncols) + " fields, got " +
                                  std::to_string(fields.size()));
    for (std::size_t c = 0; c < ncols; ++c) {
      const CsvColumn& col = schema.columns[c];
      const std::string& f = fields[c];
      switch (col.kind) {
        case CsvColumn::Kind::Ignore: break;
        case CsvColumn::Kind::Numeric: {
          double v = 0;
          const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
          if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v))
            throw row_error(lineno, "column '" + col.name + "' is not numeric: '" + f + "'");
          numeric[c].push_back(v);
          break;
        }
        case CsvColumn::Kind::Categorical: {
          const auto it = std::find(col.categories.begin(), col.categories.end(), f);
          if (it != col.categories.end()) {
            category[c].push_back(static_cast<std::int32_t>(it - col.categories.begin()));
          } else if (lenient) {
            category[c].push_back(static_cast<std::int32_t>(col.categories.size()));
          } else {
            throw Error("unknown_category", "line " + std::to_string(lineno) + ": column '" +
                                                col.name + "' has unknown value '" + f + "'");
          }
          break;
        }
        case CsvColumn::Kind::Label: {
          if (f.empty() || f == schema.missing)
            throw row_error(lineno, "missing label field '" + col.name + "'");
          const bool pos = std::find(col.positive.begin(), col.positive.end(), f) != col.positive.end();
          const bool neg = col.negative.empty() ||
                           std::find(col.negative.begin(), col.negative.end(), f) != col.negative.end();
          if (!pos && !neg) throw row_error(lineno, "unknown label value '" + f + "'");
          labels.push_back(pos ? 1 : 0);
          break;
        }
      }
    }
  }
  if (!header_seen) throw Error("malformed_row", "file is empty; expected a header row");

  std::size_t width = 0;
  for (const auto& col : schema.columns) {
    if (col.kind == CsvColumn::Kind::Numeric) width += 1;
    if (col.kind == CsvColumn::Kind::Categorical) width += col.categories.size() + (lenient ? 1 : 0);
  }
  const std::size_t n = labels.size();
  nn::Tensor features({n, width});
  Dataset ds{name, {}, labels, 2, {}};
  std::size_t offset = 0;
  for (std::size_t c = 0; c < ncols; ++c) {
    const CsvColumn& col = schema.columns[c];
    if (col.kind == CsvColumn::Kind::Numeric) {
      const auto& v = numeric[c];
      double lo = col.min.value_or(v.empty() ? 0.0 : *std::min_element(v.begin(), v.end()));
      double hi = col.max.value_or(v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()));
      const double range = hi - lo;
      for (std::size_t r = 0; r < n; ++r)
        features[r * width + offset] =
            range > 0 ? static_cast<float>((v[r] - lo) / range) : 0.0f;
      offset += 1;
    } else if (col.kind == CsvColumn::Kind::Categorical) {
      for (std::size_t r = 0; r < n; ++r)
        features[r * width + offset + static_cast<std::size_t>(category[c][r])] = 1.0f;
      offset += col.categories.size() + (lenient ? 1 : 0);
      ds.attributes[col.name] = std::move(category[c]);
    }
  }
  ds.features = std::move(features);
  ds.validate();
  return ds;
}

Dataset load_csv_adult(const std::filesystem::path& path, const CsvSchema& schema,
                       CategoryMode mode) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open " + path.string());
  return parse_csv_dataset(in, schema, mode, "adult");
}

}  // namespace splitbench::data
