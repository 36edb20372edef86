#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace readmit::csv {

// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

// Strict parse of a whole token; nullopt on trailing garbage or empty input.
std::optional<double> parse_double(std::string_view token);

// Splits one line on commas, trimming ASCII whitespace and one layer of
// surrounding double quotes from each field.
std::vector<std::string> split_line(std::string_view line);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void write_table(std::ostream& out, const Table& table);
void write_table(const std::filesystem::path& path, const Table& table);
Table read_table(const std::filesystem::path& path);

}  // namespace readmit::csv
