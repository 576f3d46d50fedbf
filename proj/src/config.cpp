#include "eit/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "eit/error.hpp"

namespace eit {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

double parse_double(const std::string& text, const std::string& what) {
  const std::string s = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw InputError(what + ": not a number: '" + text + "'");
  }
  return value;
}

long long parse_int(const std::string& text, const std::string& what) {
  const std::string s = trim(text);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw InputError(what + ": not an integer: '" + text + "'");
  }
  return value;
}

KeyValueFile KeyValueFile::parse(const std::string& text, const std::string& origin) {
  KeyValueFile file;
  file.origin_ = origin;
  std::istringstream in(text);
  std::string line, section;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(number);
    if (line.front() == '[') {
      if (line.back() != ']') throw InputError(where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw InputError(where + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw InputError(where + ": empty key");
    file.add(section.empty() ? key : section + "." + key, trim(line.substr(eq + 1)));
  }
  return file;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

void KeyValueFile::add(const std::string& key, const std::string& value) {
  auto& slot = values_[key];
  if (slot.empty()) order_.push_back(key);
  slot.push_back(value);
}

std::optional<std::string> KeyValueFile::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second.back();
}

std::vector<std::string> KeyValueFile::all(const std::string& key) const {
  const auto it = values_.find(key);
  return it == values_.end() ? std::vector<std::string>{} : it->second;
}

std::optional<double> KeyValueFile::get_double(const std::string& key) const {
  const auto v = get(key);
  if (!v) return std::nullopt;
  return parse_double(*v, origin_ + ": " + key);
}

std::optional<long long> KeyValueFile::get_int(const std::string& key) const {
  const auto v = get(key);
  if (!v) return std::nullopt;
  return parse_int(*v, origin_ + ": " + key);
}

std::optional<bool> KeyValueFile::get_bool(const std::string& key) const {
  const auto v = get(key);
  if (!v) return std::nullopt;
  std::string s = *v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  throw InputError(origin_ + ": " + key + ": expected a boolean, got '" + *v + "'");
}

std::string KeyValueFile::to_string() const {
  // Top-level keys first, then one block per section in first-seen order.
  std::ostringstream out;
  std::vector<std::string> sections;
  for (const auto& key : order_) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) {
      for (const auto& v : values_.at(key)) out << key << " = " << v << '\n';
    } else if (std::find(sections.begin(), sections.end(), key.substr(0, dot)) == sections.end()) {
      sections.push_back(key.substr(0, dot));
    }
  }
  for (const auto& section : sections) {
    out << '[' << section << "]\n";
    for (const auto& key : order_) {
      if (key.rfind(section + ".", 0) != 0) continue;
      for (const auto& v : values_.at(key)) out << key.substr(section.size() + 1) << " = " << v << '\n';
    }
  }
  return out.str();
}

}  // namespace eit
