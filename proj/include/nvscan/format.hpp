#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nvscan {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

/// Strict parse of a whole string as a double; throws std::invalid_argument.
double parse_double(const std::string& text);

std::vector<std::string> split_ws(const std::string& text);

/// Raw little-endian float64 values, independent of host byte order.
void write_f64_le(std::ostream& out, const std::vector<double>& values);
std::vector<double> read_f64_le(std::istream& in);

}  // namespace nvscan
