#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cctype>
#include <charconv>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "bacon/csv.hpp"

namespace bacon {

// Bad or unknown configuration. Maps to exit code 2 in the CLI.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat "section.key" -> value store loaded from an INI file and overridden by
// command-line flags. Keys outside the allowed set are rejected by name.
class Config {
 public:
  explicit Config(std::set<std::string> allowed = {}) : allowed_(std::move(allowed)) {}

  static Config load(const std::string& path, std::set<std::string> allowed) {
    Config c(std::move(allowed));
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path);
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(path, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError("cannot parse config " + path + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    for (const auto& [section, body] : tree) {
      if (body.empty()) {
        c.set(section, body.data());  // key outside any section
        continue;
      }
      for (const auto& [key, value] : body) c.set(section + "." + key, value.data());
    }
    return c;
  }

  void set(const std::string& key, const std::string& value) {
    if (!allowed_.empty() && !allowed_.count(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string text(const std::string& key, const std::string& fallback) const { return get<std::string>(key, fallback); }

  template <class T>
  T get(const std::string& key, T fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : parse<T>(key, it->second);
  }

  // Comma-separated list.
  template <class T>
  std::vector<T> get_list(const std::string& key, std::vector<T> fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<T> out;
    std::string item;
    for (std::size_t pos = 0; pos <= it->second.size(); ++pos) {
      if (pos == it->second.size() || it->second[pos] == ',') {
        out.push_back(parse<T>(key, item));
        item.clear();
      } else {
        item += it->second[pos];
      }
    }
    return out;
  }

  // Stable text form, used for the provenance hash.
  std::string canonical() const {
    std::string s;
    for (const auto& [k, v] : values_) s += k + "=" + v + "\n";
    return s;
  }
  std::uint64_t hash() const { return fnv1a(canonical()); }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  template <class T>
  static T parse(const std::string& key, std::string text) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.erase(text.begin());
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
    if constexpr (std::is_same_v<T, std::string>) {
      return text;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
      if (text == "false" || text == "0" || text == "no" || text == "off") return false;
      throw ConfigError("config key '" + key + "': expected a boolean, got '" + text + "'");
    } else {
      T v{};
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
      return v;
    }
  }

  std::set<std::string> allowed_;
  std::map<std::string, std::string> values_;
};

}  // namespace bacon
