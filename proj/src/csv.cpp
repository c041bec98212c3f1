#include "superstat/csv.hpp"

#include <charconv>
#include <istream>
#include <string>

#include <fmt/format.h>

#include "superstat/error.hpp"

namespace superstat::csv {

std::string num(double v) { return fmt::format("{}", v); }

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.emplace_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double to_double(std::string_view field, std::size_t line_no) {
    field = trim(field);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
        throw InputError(fmt::format("line {}: cannot parse number '{}'", line_no, field));
    }
    return v;
}

std::int64_t to_int(std::string_view field, std::size_t line_no) {
    field = trim(field);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
        throw InputError(fmt::format("line {}: cannot parse integer '{}'", line_no, field));
    }
    return v;
}

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw InputError(fmt::format("missing column '{}'", name));
}

Table read_table(std::istream& in) {
    Table t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = trim(line);
        if (body.empty()) continue;
        if (body.front() == '#') {
            // Metadata: whitespace-separated key=value tokens.
            std::string_view rest = body.substr(1);
            while (!rest.empty()) {
                rest = trim(rest);
                const auto end = rest.find_first_of(" \t");
                const auto token = rest.substr(0, end);
                const auto eq = token.find('=');
                if (eq != std::string_view::npos) {
                    t.meta[std::string(token.substr(0, eq))] = std::string(token.substr(eq + 1));
                }
                if (end == std::string_view::npos) break;
                rest = rest.substr(end);
            }
            continue;
        }
        auto fields = split(body);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw InputError(fmt::format("line {}: expected {} fields, found {}", line_no,
                                         t.header.size(), fields.size()));
        }
        t.rows.push_back(std::move(fields));
        t.line_numbers.push_back(line_no);
    }
    return t;
}

}  // namespace superstat::csv
