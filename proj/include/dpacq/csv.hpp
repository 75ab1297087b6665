#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dpacq {

// Minimal comma-separated table: first non-comment line is the header.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Index of a header column, or -1.
    int column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

long parse_long(const std::string& field);
double parse_double(const std::string& field);

// Shortest round-trip representation ("%.17g").
std::string format_double(double v);

}  // namespace dpacq
