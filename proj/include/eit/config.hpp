#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace eit {

/// Flat `key = value` text with `[section]` headers and `#` comments. Keys
/// inside a section are stored as `section.key`; a key may repeat.
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text, const std::string& origin = "config");
  static KeyValueFile load(const std::filesystem::path& path);

  void add(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  /// Last value of the key.
  std::optional<std::string> get(const std::string& key) const;
  std::vector<std::string> all(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;
  std::optional<long long> get_int(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;
  /// Keys in first-seen order.
  const std::vector<std::string>& keys() const { return order_; }

  std::string to_string() const;

 private:
  std::string origin_ = "config";
  std::map<std::string, std::vector<std::string>> values_;
  std::vector<std::string> order_;
};

/// Parses a double with the whole string consumed; throws InputError naming `what`.
double parse_double(const std::string& text, const std::string& what);
long long parse_int(const std::string& text, const std::string& what);

}  // namespace eit
