#include "hcl/table.hpp"

#include "hcl/errors.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

namespace hcl {

std::string format_number(double v)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

double parse_number(const std::string& text)
{
    double v = 0;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (r.ec != std::errc() || r.ptr != text.data() + text.size()) {
        throw ConfigError("not a number: '" + text + "'");
    }
    return v;
}

namespace {

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

} // namespace

void write_table(std::ostream& os, const Table& table)
{
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        os << (c ? "," : "") << table.header[c];
    }
    os << '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size()) {
            throw ShapeMismatch("table row width differs from the header");
        }
        for (std::size_t c = 0; c < row.size(); ++c) {
            os << (c ? "," : "") << format_number(row[c]);
        }
        os << '\n';
    }
}

Table read_table(std::istream& is)
{
    Table t;
    std::string line;
    if (!std::getline(is, line)) {
        throw ConfigError("empty table");
    }
    t.header = split(line);
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        const auto cells = split(line);
        if (cells.size() != t.header.size()) {
            throw ConfigError("table row width differs from the header: " + line);
        }
        std::vector<double> row;
        for (const auto& c : cells) {
            row.push_back(parse_number(c));
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

void write_long(std::ostream& os, const std::vector<LongRow>& rows)
{
    os << "scenario,method,tick,value\n";
    for (const auto& r : rows) {
        os << r.scenario << ',' << r.method << ',' << r.tick << ',' << format_number(r.value) << '\n';
    }
}

std::vector<LongRow> read_long(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line) || line != "scenario,method,tick,value") {
        throw ConfigError("missing long-format header");
    }
    std::vector<LongRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        const auto c = split(line);
        if (c.size() != 4) {
            throw ConfigError("malformed long-format row: " + line);
        }
        rows.push_back({c[0], c[1], static_cast<int>(parse_number(c[2])), parse_number(c[3])});
    }
    return rows;
}

} // namespace hcl
