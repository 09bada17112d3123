#include "dgnaea/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dgnaea::csv {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

} // namespace

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name)
            return i;
    throw std::invalid_argument("missing column '" + std::string(name) + "'");
}

Table parse(std::string_view text) {
    Table table;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool any = false;
    std::size_t line = 1, record_line = 1;

    auto end_record = [&] {
        record.push_back(std::string(trim(field)));
        field.clear();
        const bool blank = record.size() == 1 && record[0].empty();
        if (!blank) {
            if (table.header.empty())
                table.header = std::move(record);
            else {
                table.rows.push_back(std::move(record));
                table.line_numbers.push_back(record_line);
            }
        }
        record.clear();
        any = false;
    };

    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF")
        text.remove_prefix(3);

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (!any) {
            record_line = line;
            any = true;
        }
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n')
                    ++line;
                field.push_back(c);
            }
            continue;
        }
        if (c == '"')
            in_quotes = true;
        else if (c == ',') {
            record.push_back(std::string(trim(field)));
            field.clear();
        } else if (c == '\n') {
            end_record();
            ++line;
        } else
            field.push_back(c);
    }
    if (in_quotes)
        throw std::invalid_argument("unterminated quoted field");
    if (any || !field.empty() || !record.empty())
        end_record();
    return table;
}

Table read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::invalid_argument("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse(ss.str());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

void require_header(const Table& table, const std::vector<std::string>& expected, const std::string& what) {
    if (table.header != expected) {
        std::string want;
        for (std::size_t i = 0; i < expected.size(); ++i)
            want += (i ? "," : "") + expected[i];
        throw std::invalid_argument(what + ": expected header '" + want + "'");
    }
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        if (table.rows[r].size() != expected.size())
            throw std::invalid_argument(what + ": line " + std::to_string(table.line_numbers[r]) + " has " +
                                        std::to_string(table.rows[r].size()) + " fields, expected " +
                                        std::to_string(expected.size()));
}

std::string quote(std::string_view field) {
    if (field.find_first_of(",\"\n") == std::string_view::npos)
        return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc())
        throw std::runtime_error("format_double failed");
    return std::string(buf, ptr);
}

double parse_double(std::string_view s, const std::string& what) {
    s = trim(s);
    if (!s.empty() && s.front() == '+')
        s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw std::invalid_argument(what + ": not a number: '" + std::string(s) + "'");
    return v;
}

long long parse_int(std::string_view s, const std::string& what) {
    s = trim(s);
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw std::invalid_argument(what + ": not an integer: '" + std::string(s) + "'");
    return v;
}

} // namespace dgnaea::csv
