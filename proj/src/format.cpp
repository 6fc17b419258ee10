#include "nvscan/format.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace nvscan {

std::string format_double(double value) {
  std::array<char, 64> buffer{};
  const auto result = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  if (result.ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buffer.data(), result.ptr);
}

double parse_double(const std::string& text) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end != begin && (end[-1] == ' ' || end[-1] == '\t')) --end;
  if (begin != end && *begin == '+') ++begin;
  double value = 0.0;
  const auto result = std::from_chars(begin, end, value);
  if (result.ec != std::errc{} || result.ptr != end || begin == end) {
    throw std::invalid_argument("not a number: '" + text + "'");
  }
  return value;
}

std::vector<std::string> split_ws(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> parts;
  for (std::string token; in >> token;) parts.push_back(token);
  return parts;
}

void write_f64_le(std::ostream& out, const std::vector<double>& values) {
  std::array<char, 8> bytes{};
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int k = 0; k < 8; ++k) bytes[k] = static_cast<char>((bits >> (8 * k)) & 0xFFu);
    out.write(bytes.data(), 8);
  }
}

std::vector<double> read_f64_le(std::istream& in) {
  const std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (raw.size() % 8 != 0) throw std::runtime_error("read_f64_le: truncated float64 stream");
  std::vector<double> values(raw.size() / 8);
  for (std::size_t n = 0; n < values.size(); ++n) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[8 * n + k])) << (8 * k);
    }
    values[n] = std::bit_cast<double>(bits);
  }
  return values;
}

}  // namespace nvscan
