#pragma once

// Minimal CSV reading/writing shared by the table emitters.

#include <filesystem>
#include <string>
#include <vector>

namespace autocal::csv {

using Table = std::vector<std::vector<std::string>>;

/// Shortest representation that round-trips a double exactly.
std::string format_double(double v);
double parse_double(const std::string& s);

std::string to_string(const Table& rows);
Table parse(const std::string& text);

void write(const std::filesystem::path& path, const Table& rows);
Table read(const std::filesystem::path& path);

}  // namespace autocal::csv
