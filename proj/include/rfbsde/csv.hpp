#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rfbsde {

/// Shortest round-trip decimal form ("%.17g"); outputs are byte-stable.
std::string fmt_double(double v);

/// Comma-separated row of numbers.
std::string csv_row(const std::vector<double>& values);

/// Splits one CSV line on commas (no quoting support; our files never quote).
std::vector<std::string> split_csv(const std::string& line);

/// Parses "key=value" tokens from a "# key=value key=value" comment line.
std::vector<std::pair<std::string, std::string>> parse_header_pairs(const std::string& line);

double parse_double(const std::string& token);

}  // namespace rfbsde
