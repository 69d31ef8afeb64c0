#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dvqr/types.hpp"

//! comma-separated values with a required header row; "." decimal point,
//! UTF-8, an empty field is a missing value (stored as NaN)
namespace dvqr {
namespace csv {

struct Table {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns; // NaN marks a missing field

    std::size_t rows() const
    {
        return columns.empty() ? 0 : columns[0].size();
    }

    std::size_t column_index(const std::string& name) const
    {
        for (std::size_t j = 0; j < names.size(); ++j)
            if (names[j] == name)
                return j;
        throw schema_error("column not found: " + name);
    }

    bool has_column(const std::string& name) const
    {
        for (const auto& n : names)
            if (n == name)
                return true;
        return false;
    }
};

namespace detail {

inline std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.push_back("");
    return out;
}

inline std::string strip(const std::string& s)
{
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos)
        return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace detail

inline Table read(std::istream& in)
{
    Table t;
    std::string line;
    if (!std::getline(in, line))
        throw input_error("csv: empty input, header row required");
    for (auto& name : detail::split(line))
        t.names.push_back(detail::strip(name));
    if (t.names.empty())
        throw input_error("csv: header row has no columns");
    t.columns.assign(t.names.size(), {});

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::strip(line).empty())
            continue;
        auto cells = detail::split(line);
        if (cells.size() != t.names.size())
            throw input_error("csv: line " + std::to_string(lineno) + " has " +
                              std::to_string(cells.size()) + " fields, expected " +
                              std::to_string(t.names.size()));
        for (std::size_t j = 0; j < cells.size(); ++j) {
            std::string cell = detail::strip(cells[j]);
            if (cell.empty()) {
                t.columns[j].push_back(
                    std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            try {
                std::size_t pos = 0;
                double v = std::stod(cell, &pos);
                if (pos != cell.size())
                    throw std::invalid_argument(cell);
                t.columns[j].push_back(v);
            } catch (const std::exception&) {
                throw input_error("csv: line " + std::to_string(lineno) +
                                  ", column " + t.names[j] +
                                  ": cannot parse \"" + cell + "\"");
            }
        }
    }
    return t;
}

inline Table read_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw input_error("cannot open: " + path);
    return read(in);
}

//! 12 significant digits: round-trips within 1e-10 relative error
inline void write(std::ostream& out, const std::vector<std::string>& names,
                  const std::vector<std::vector<double>>& columns)
{
    for (std::size_t j = 0; j < names.size(); ++j)
        out << (j ? "," : "") << names[j];
    out << '\n';
    out << std::setprecision(12);
    std::size_t rows = columns.empty() ? 0 : columns[0].size();
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < columns.size(); ++j) {
            if (j)
                out << ',';
            if (!std::isnan(columns[j][i]))
                out << columns[j][i];
        }
        out << '\n';
    }
}

inline void write_file(const std::string& path,
                       const std::vector<std::string>& names,
                       const std::vector<std::vector<double>>& columns)
{
    std::ofstream out(path);
    if (!out)
        throw input_error("cannot write: " + path);
    write(out, names, columns);
}

} // namespace csv
} // namespace dvqr
