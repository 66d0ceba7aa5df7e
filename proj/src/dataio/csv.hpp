#pragma once

// Minimal RFC 4180 style reader shared by the loaders.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "epinuts/dataio.hpp"

namespace epinuts::dataio::csv {

struct Row {
  std::size_t line;
  std::vector<std::string> fields;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;
  // Position of each required column in the header; empty when any is missing.
  std::vector<std::size_t> columns;
};

// Reads the whole stream, checks the header has every required column and
// every row has as many fields as the header. Problems go to `violations`.
Table read(std::istream& in, const std::vector<std::string>& required,
           std::vector<Violation>& violations);

std::optional<std::int64_t> parse_int(std::string_view text);
std::optional<double> parse_double(std::string_view text);

// Quotes a field when it contains a comma, quote or line break.
std::string escape(std::string_view field);

}  // namespace epinuts::dataio::csv
