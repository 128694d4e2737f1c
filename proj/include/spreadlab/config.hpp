#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>

#include "spreadlab/errors.hpp"

namespace spreadlab {

/// Flat key-value configuration. INI sections become dotted prefixes, so
///
///     [spectral]
///     oversample = 4
///
/// is addressed as "spectral.oversample". Unknown keys are reported by unused_keys().
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig from_string(const std::string& text) {
    std::istringstream in(text);
    return from_stream(in, "<string>");
  }

  static KeyValueConfig from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config file: " + path.string());
    return from_stream(in, path.string());
  }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  std::optional<std::string> raw(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    used_.insert(key);
    return it->second;
  }

  /// Typed lookup; `key` may be dotted or bare, and "section.key" wins over "key".
  template <class T>
  std::optional<T> get(const std::string& section, const std::string& key) const {
    auto text = raw(section + "." + key);
    if (!text) text = raw(key);
    if (!text) return std::nullopt;
    return convert<T>(section + "." + key, *text);
  }

  template <class T>
  T get_or(const std::string& section, const std::string& key, T fallback) const {
    return get<T>(section, key).value_or(fallback);
  }

  std::set<std::string> unused_keys() const {
    std::set<std::string> out;
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) out.insert(k);
    return out;
  }

 private:
  static KeyValueConfig from_stream(std::istream& in, const std::string& name) {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw InvalidArgument("config " + name + ": " + e.message() + " at line " +
                            std::to_string(e.line()));
    }
    KeyValueConfig cfg;
    for (const auto& [key, node] : tree) {
      if (node.empty()) {
        cfg.values_[key] = node.data();
      } else {
        for (const auto& [sub, leaf] : node) cfg.values_[key + "." + sub] = leaf.data();
      }
    }
    return cfg;
  }

  template <class T>
  static T convert(const std::string& key, const std::string& text) {
    if constexpr (std::is_same_v<T, std::string>) {
      return text;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (text == "true" || text == "1" || text == "yes") return true;
      if (text == "false" || text == "0" || text == "no") return false;
      throw InvalidArgument("config key " + key + ": expected a boolean, got '" + text + "'");
    } else {
      T value{};
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
      if (ec != std::errc{} || ptr != text.data() + text.size())
        throw InvalidArgument("config key " + key + ": cannot parse '" + text + "'");
      return value;
    }
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace spreadlab
