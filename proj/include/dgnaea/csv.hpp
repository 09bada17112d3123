#ifndef DGNAEA_CSV_HPP
#define DGNAEA_CSV_HPP

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dgnaea::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line of each row

    /// Column position of `name`; throws if absent.
    std::size_t column(std::string_view name) const;
};

/// RFC-4180-style reader (double-quoted fields, "" escapes). Blank lines are skipped.
Table read(const std::filesystem::path& path);
Table parse(std::string_view text);

/// Throws unless the header equals `expected` exactly.
void require_header(const Table& table, const std::vector<std::string>& expected, const std::string& what);

std::string quote(std::string_view field);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s, const std::string& what);
long long parse_int(std::string_view s, const std::string& what);

} // namespace dgnaea::csv

#endif // DGNAEA_CSV_HPP
