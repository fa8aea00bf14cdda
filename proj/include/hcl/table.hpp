#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hcl {

/// Numeric CSV table. Values are written in the shortest form that reads
/// back to the same double.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    bool operator==(const Table&) const = default;
};

void write_table(std::ostream& os, const Table& table);
Table read_table(std::istream& is);

/// Plotting-friendly long format: scenario,method,tick,value.
struct LongRow {
    std::string scenario;
    std::string method;
    int tick = 0;
    double value = 0;

    bool operator==(const LongRow&) const = default;
};

void write_long(std::ostream& os, const std::vector<LongRow>& rows);
std::vector<LongRow> read_long(std::istream& is);

std::string format_number(double v);
double parse_number(const std::string& text);

} // namespace hcl
