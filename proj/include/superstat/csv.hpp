#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace superstat::csv {

/// Shortest round-trip representation of a double.
std::string num(double v);

std::vector<std::string> split(std::string_view line, char sep = ',');
std::string_view trim(std::string_view s);

double to_double(std::string_view field, std::size_t line_no);
std::int64_t to_int(std::string_view field, std::size_t line_no);

/// A parsed table: `# key=value` metadata lines, a header row, data rows.
struct Table {
    std::map<std::string, std::string> meta;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;

    /// Index of a header column; throws InputError if absent.
    std::size_t column(std::string_view name) const;
};

Table read_table(std::istream& in);

}  // namespace superstat::csv
