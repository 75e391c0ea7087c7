#pragma once

// Key-value configuration text shared by every module:
//
//   # comment
//   kind = ball
//   n    = 3
//   sides = 1, 2
//
// Keys are unique; values keep their original text and are converted on
// access. Conversion failures name the line and field.

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "schauder/core/errors.hpp"

namespace schauder {

class KeyValueConfig {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static KeyValueConfig parse(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      auto hash = raw.find('#');
      if (hash != std::string::npos) raw.erase(hash);
      std::string line = trim(raw);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError(line_no, "", "expected 'key = value'");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError(line_no, "", "empty key");
      if (cfg.entries_.count(key))
        throw ConfigError(line_no, key, "duplicate key (first defined on line " +
                                            std::to_string(cfg.entries_.at(key).line) + ")");
      cfg.entries_.emplace(key, Entry{value, line_no});
      cfg.order_.push_back(key);
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(0, "", "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  void set(const std::string& key, const std::string& value) {
    if (!has(key)) order_.push_back(key);
    entries_[key].value = value;
  }

  const std::string& get_string(const std::string& key) const { return entry(key).value; }
  std::string get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
  }

  double get_double(const std::string& key) const {
    const auto& e = entry(key);
    return to_double(e.value, e.line, key);
  }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  long get_int(const std::string& key) const {
    const auto& e = entry(key);
    double v = to_double(e.value, e.line, key);
    if (v != static_cast<double>(static_cast<long>(v)))
      throw ConfigError(e.line, key, "expected an integer, got '" + e.value + "'");
    return static_cast<long>(v);
  }
  long get_int(const std::string& key, long fallback) const {
    return has(key) ? get_int(key) : fallback;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& e = entry(key);
    if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
    if (e.value == "false" || e.value == "0" || e.value == "no") return false;
    throw ConfigError(e.line, key, "expected a boolean, got '" + e.value + "'");
  }

  std::vector<double> get_list(const std::string& key) const {
    const auto& e = entry(key);
    std::vector<double> out;
    std::stringstream ss(e.value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) throw ConfigError(e.line, key, "empty list element");
      out.push_back(to_double(item, e.line, key));
    }
    if (out.empty()) throw ConfigError(e.line, key, "empty list");
    return out;
  }
  std::vector<double> get_list(const std::string& key, std::vector<double> fallback) const {
    return has(key) ? get_list(key) : fallback;
  }

  int line_of(const std::string& key) const { return has(key) ? entries_.at(key).line : 0; }

  /// Keys in order of first appearance.
  const std::vector<std::string>& keys() const { return order_; }

  /// Entries whose key starts with `prefix`, with the prefix stripped.
  /// Line numbers are kept so diagnostics still point into the source.
  KeyValueConfig subset(const std::string& prefix) const {
    KeyValueConfig out;
    for (const auto& k : order_)
      if (k.size() > prefix.size() && k.compare(0, prefix.size(), prefix) == 0) {
        std::string sub = k.substr(prefix.size());
        out.entries_.emplace(sub, entries_.at(k));
        out.order_.push_back(sub);
      }
    return out;
  }

  /// Canonical text form (insertion order) used to embed configs in reports.
  std::string to_text() const {
    std::string out;
    for (const auto& k : order_) out += k + " = " + entries_.at(k).value + "\n";
    return out;
  }

 private:
  const Entry& entry(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError(0, key, "missing required field");
    return it->second;
  }

  static double to_double(const std::string& s, int line, const std::string& key) {
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
      throw ConfigError(line, key, "expected a number, got '" + s + "'");
    return v;
  }

  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;
};

}  // namespace schauder
