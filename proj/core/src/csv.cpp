#include "nbi/csv.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "nbi/text.hpp"

namespace nbi {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line,
                       const std::string& column, const std::string& what) {
  throw CsvError(path.string() + ":" + std::to_string(line) + ": column '" +
                 column + "': " + what);
}

}  // namespace

Dataset read_dataset_csv(const std::filesystem::path& path,
                         const FeatureSchema& schema) {
  schema.validate();
  std::ifstream stream(path);
  if (!stream) throw CsvError("cannot open file: " + path.string());

  std::string line;
  if (!std::getline(stream, line))
    throw CsvError(path.string() + ": empty file, expected a header");
  const auto header = split_csv_line(line);

  auto column_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw CsvError(path.string() + ": header is missing column '" + name +
                   "'");
  };

  const int response_at = column_of(schema.response_column);
  const int exposure_at = column_of(schema.exposure_column);
  std::vector<int> feature_at;
  feature_at.reserve(schema.features.size());
  for (const auto& column : schema.features)
    feature_at.push_back(column_of(column.name));

  Dataset data = make_dataset(schema);
  std::size_t line_no = 1;
  while (std::getline(stream, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw CsvError(path.string() + ":" + std::to_string(line_no) +
                     ": expected " + std::to_string(header.size()) +
                     " fields, found " + std::to_string(fields.size()));

    std::int64_t claims = 0;
    if (!parse_int64(fields[static_cast<std::size_t>(response_at)], claims) ||
        claims < 0)
      fail(path, line_no, schema.response_column,
           "expected a non-negative integer, found '" +
               fields[static_cast<std::size_t>(response_at)] + "'");
    data.claims.push_back(claims);

    double exposure = 0.0;
    if (!parse_double(fields[static_cast<std::size_t>(exposure_at)],
                      exposure) ||
        !(exposure > 0.0) || !std::isfinite(exposure))
      fail(path, line_no, schema.exposure_column,
           "expected a positive number, found '" +
               fields[static_cast<std::size_t>(exposure_at)] + "'");
    data.exposure.push_back(exposure);

    for (std::size_t f = 0; f < schema.features.size(); ++f) {
      const auto& column = schema.features[f];
      const std::string& cell = fields[static_cast<std::size_t>(feature_at[f])];
      const auto slot =
          static_cast<std::size_t>(schema.pool_slot(static_cast<int>(f)));
      if (column.kind == FeatureKind::numeric) {
        double value = 0.0;
        if (!parse_double(cell, value) || !std::isfinite(value))
          fail(path, line_no, column.name,
               "expected a finite number, found '" + cell + "'");
        data.numeric_pool[slot].push_back(value);
      } else {
        const auto label = trim(cell);
        int code = -1;
        for (int c = 0; c < column.category_count(); ++c)
          if (column.categories[static_cast<std::size_t>(c)] == label) {
            code = c;
            break;
          }
        if (code < 0)
          fail(path, line_no, column.name,
               "unknown category '" + std::string(label) + "'");
        data.categorical_pool[slot].push_back(code);
      }
    }
  }
  data.validate();
  return data;
}

void write_dataset_csv(const Dataset& data,
                       const std::filesystem::path& path) {
  std::ostringstream out;
  out << data.schema.response_column << ',' << data.schema.exposure_column;
  for (const auto& column : data.schema.features) out << ',' << column.name;
  out << '\n';
  for (std::size_t row = 0; row < data.size(); ++row) {
    out << data.claims[row] << ',' << format_double(data.exposure[row]);
    for (std::size_t f = 0; f < data.schema.features.size(); ++f) {
      const auto& column = data.schema.features[f];
      const auto slot =
          static_cast<std::size_t>(data.schema.pool_slot(static_cast<int>(f)));
      out << ',';
      if (column.kind == FeatureKind::numeric)
        out << format_double(data.numeric_pool[slot][row]);
      else
        out << column.categories[static_cast<std::size_t>(
            data.categorical_pool[slot][row])];
    }
    out << '\n';
  }
  write_file(path, out.str());
}

}  // namespace nbi
