#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sqmc {

/// Flat `key = value` configuration block. Blank lines and `#` comments are
/// ignored; later keys override earlier ones.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig from_file(const std::filesystem::path& path);

  bool contains(const std::string& key) const { return entries_.contains(key); }
  std::optional<std::string> get(const std::string& key) const;
  void set(const std::string& key, std::string value) { entries_[key] = std::move(value); }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated list of reals; empty when the key is absent.
  std::vector<double> get_doubles(const std::string& key) const;

  /// Single-line canonical rendering, `k1=v1;k2=v2` in key order.
  std::string to_string() const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

/// Parse a comma-separated list ("1,2,3"). Throws std::invalid_argument.
std::vector<double> parse_real_list(std::string_view text);
std::vector<std::string> split_list(std::string_view text, char sep = ',');

}  // namespace sqmc
