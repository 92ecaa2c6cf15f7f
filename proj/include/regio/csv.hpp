#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace regio::csv {

struct Row {
  std::size_t line = 0;  // 1-based line number in the source file
  std::vector<std::string> cells;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;
};

// Minimal RFC 4180 reader: comma separator, double-quote escaping, CRLF tolerated.
// Quoted cells may not span lines. Blank lines are skipped.
Table read(const std::filesystem::path& path);
Table parse(const std::string& text);

std::string escape(const std::string& cell);

// 17 significant digits, round-trips through strtod.
std::string format_double(double value);

}  // namespace regio::csv
