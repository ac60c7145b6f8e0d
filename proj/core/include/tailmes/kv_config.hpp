#pragma once

// Flat key-value configuration text with optional [section] headers:
//
//   # comment
//   [design]
//   n = 1000
//   p_grid = 0.01, 0.001
//
// Keys inside a section are addressed as "section.key". Values are kept as
// trimmed strings; typed accessors throw ConfigError naming the key.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tailmes {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  // Keys that are not in `known`.
  std::vector<std::string> unknown_keys(const std::vector<std::string>& known) const;

  const std::map<std::string, std::string>& entries() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Shortest round-trip decimal text for v ('.' decimal point, locale independent).
std::string format_double(double v);

}  // namespace tailmes
