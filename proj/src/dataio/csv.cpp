#include "csv.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <iterator>

namespace epinuts::dataio::csv {

namespace {

std::string_view trim(std::string_view s) {
  const auto blank = [](char c) { return c == ' ' || c == '\t'; };
  while (!s.empty() && blank(s.front())) s.remove_prefix(1);
  while (!s.empty() && blank(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

Table read(std::istream& in, const std::vector<std::string>& required,
           std::vector<Violation>& violations) {
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (text.starts_with("\xEF\xBB\xBF")) text.erase(0, 3);

  std::vector<Row> records;
  Row current{1, {}};
  std::string field;
  bool quoted = false;
  bool field_was_quoted = false;
  std::size_t line = 1;
  std::size_t quote_line = 0;
  auto end_field = [&] {
    current.fields.push_back(field_was_quoted ? field : std::string(trim(field)));
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = current.fields.size() == 1 && current.fields[0].empty();
    if (!blank) records.push_back(std::move(current));
    current = Row{line + 1, {}};
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\0') {
      violations.push_back({line, "", "file contains a NUL byte"});
      return {};
    }
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!trim(field).empty() || field_was_quoted) {
          violations.push_back({line, "", "stray quote inside an unquoted field"});
        }
        field.clear();
        quoted = true;
        field_was_quoted = true;
        quote_line = line;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        [[fallthrough]];
      case '\n':
        end_record();
        ++line;
        break;
      default:
        if (field_was_quoted) {
          violations.push_back({line, "", "text after a closing quote"});
          field_was_quoted = false;
        }
        field.push_back(c);
    }
  }
  if (quoted) {
    violations.push_back({quote_line, "", "unterminated quoted field"});
    return {};
  }
  if (!field.empty() || field_was_quoted || !current.fields.empty()) end_record();

  Table table;
  if (records.empty()) {
    violations.push_back({0, "", "file is empty (expected a header line)"});
    return table;
  }
  table.header = std::move(records.front().fields);
  const std::size_t header_line = records.front().line;
  std::vector<std::size_t> columns;
  for (const auto& name : required) {
    const auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) {
      violations.push_back({header_line, name, fmt::format("missing column '{}'", name)});
    } else {
      columns.push_back(static_cast<std::size_t>(it - table.header.begin()));
    }
  }
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (std::count(table.header.begin(), table.header.end(), table.header[i]) > 1 &&
        std::find(table.header.begin(), table.header.end(), table.header[i]) ==
            table.header.begin() + static_cast<std::ptrdiff_t>(i)) {
      violations.push_back({header_line, table.header[i],
                            fmt::format("column '{}' appears more than once", table.header[i])});
    }
  }
  if (columns.size() == required.size()) table.columns = std::move(columns);
  for (std::size_t r = 1; r < records.size(); ++r) {
    Row& row = records[r];
    if (row.fields.size() != table.header.size()) {
      violations.push_back({row.line, "",
                            fmt::format("expected {} fields, found {}", table.header.size(),
                                        row.fields.size())});
      continue;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::optional<std::int64_t> parse_int(std::string_view text) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::optional<double> parse_double(std::string_view text) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() ||
      !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace epinuts::dataio::csv
