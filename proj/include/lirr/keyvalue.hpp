#pragma once

// `key = value` text files with optional `[section]` headers. Keys inside a
// section are addressed as "section.key". `#` and `;` start comments.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lirr {

class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueFile load(const std::string& path);

  bool has(const std::string& key) const { return values_.contains(key); }
  void set(const std::string& key, const std::string& value);

  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<std::int64_t> get_int_list(const std::string& key) const;

  /// Keys in insertion order.
  const std::vector<std::string>& keys() const { return order_; }

  /// Serializes with sections grouped in first-seen order.
  std::string to_string() const;
  void save(const std::string& path) const;

 private:
  std::string origin_ = "<string>";
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);
/// Parses a double, throwing ConfigError naming `what` on failure.
double parse_double(const std::string& s, const std::string& what);
std::int64_t parse_int(const std::string& s, const std::string& what);
/// Shortest text that parses back to the same double (17 significant digits).
std::string format_double(double v);

}  // namespace lirr
