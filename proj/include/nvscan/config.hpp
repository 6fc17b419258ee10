#pragma once

// INI-style experiment configuration with a fixed schema. Every key has a
// default; unknown sections or keys are rejected. A [result] section, as
// written into output sidecars, is ignored on input so sidecars replay.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nvscan {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Config {
 public:
  /// All defaults.
  Config();

  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  /// Throws ConfigError for an unknown section or key.
  void set(const std::string& section, const std::string& key, const std::string& value);

  const std::string& get(const std::string& section, const std::string& key) const;
  bool is_auto(const std::string& section, const std::string& key) const;
  double number(const std::string& section, const std::string& key) const;
  std::int64_t integer(const std::string& section, const std::string& key) const;
  std::uint64_t unsigned_integer(const std::string& section, const std::string& key) const;
  bool flag(const std::string& section, const std::string& key) const;
  std::vector<double> numbers(const std::string& section, const std::string& key) const;

  /// Fully resolved configuration in the input format, sections in schema order.
  std::string resolved_text() const;

 private:
  struct Entry {
    std::string section;
    std::string key;
    std::string value;
  };
  const Entry& find(const std::string& section, const std::string& key) const;
  Entry* find_mutable(const std::string& section, const std::string& key);

  std::vector<Entry> entries_;
};

}  // namespace nvscan
