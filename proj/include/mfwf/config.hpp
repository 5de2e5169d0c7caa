#pragma once

// Flat key-value configuration with [sections], e.g.
//
//   [model]
//   c = 1
//   s = 1
//
//   [emergence]
//   n_list = 64, 256, 1024
//
// Physics parameters are never defaulted: a missing rate is an error.

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "core.hpp"

namespace mfwf {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return from_stream(in, path);
  }

  static Config from_string(const std::string& text) {
    std::istringstream in(text);
    return from_stream(in, "<string>");
  }

  bool has(const std::string& section, const std::string& key) const { return lookup(section, key).has_value(); }

  std::optional<std::string> lookup(const std::string& section, const std::string& key) const {
    auto s = values_.find(section);
    if (s == values_.end()) return std::nullopt;
    auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    return k->second;
  }

  std::string require_string(const std::string& section, const std::string& key) const {
    auto v = lookup(section, key);
    if (!v) throw ConfigError("missing required key '" + key + "' in section [" + section + "]");
    return *v;
  }

  double require_double(const std::string& section, const std::string& key) const {
    return parse_double(require_string(section, key), section, key);
  }

  long require_long(const std::string& section, const std::string& key) const {
    return parse_long(require_string(section, key), section, key);
  }

  double get_double(const std::string& section, const std::string& key, double fallback) const {
    auto v = lookup(section, key);
    return v ? parse_double(*v, section, key) : fallback;
  }

  long get_long(const std::string& section, const std::string& key, long fallback) const {
    auto v = lookup(section, key);
    return v ? parse_long(*v, section, key) : fallback;
  }

  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const {
    return lookup(section, key).value_or(fallback);
  }

  std::vector<double> get_list(const std::string& section, const std::string& key, std::vector<double> fallback) const {
    auto v = lookup(section, key);
    if (!v) return fallback;
    std::vector<double> out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(item, section, key));
    if (out.empty()) throw ConfigError("empty list for '" + key + "' in [" + section + "]");
    return out;
  }

  void set(const std::string& section, const std::string& key, const std::string& value) { values_[section][key] = value; }

  const std::map<std::string, std::map<std::string, std::string>>& sections() const { return values_; }

 private:
  static Config from_stream(std::istream& in, const std::string& name) {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError("malformed config '" + name + "': " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    Config cfg;
    for (const auto& [section, body] : tree) {
      if (body.empty()) throw ConfigError("config '" + name + "': key '" + section + "' outside any [section]");
      for (const auto& [key, value] : body) cfg.values_[section][key] = value.get_value<std::string>();
    }
    return cfg;
  }

  static double parse_double(const std::string& text, const std::string& section, const std::string& key) {
    try {
      std::size_t used = 0;
      double v = std::stod(text, &used);
      if (text.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "' in [" + section + "] is not a number: '" + text + "'");
    }
  }

  static long parse_long(const std::string& text, const std::string& section, const std::string& key) {
    try {
      std::size_t used = 0;
      long v = std::stol(text, &used);
      if (text.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "' in [" + section + "] is not an integer: '" + text + "'");
    }
  }

  std::map<std::string, std::map<std::string, std::string>> values_;
};

/// Reads the [model] section. `required` lists the rate keys the caller needs;
/// n_sites is required only when `need_sites` is set.
inline ModelParams model_from_config(const Config& cfg, const std::vector<std::string>& required, bool need_sites) {
  ModelParams p;
  auto rate = [&](const std::string& key, double& slot) {
    bool needed = std::find(required.begin(), required.end(), key) != required.end();
    if (needed)
      slot = cfg.require_double("model", key);
    else
      slot = cfg.get_double("model", key, 0.0);
  };
  rate("c", p.c);
  rate("s", p.s);
  rate("d", p.d);
  rate("m", p.m);
  if (need_sites)
    p.n_sites = static_cast<int>(cfg.require_long("model", "n_sites"));
  else
    p.n_sites = static_cast<int>(cfg.get_long("model", "n_sites", 1));
  p.beta1 = cfg.get_double("model", "beta1", 0.0);
  p.beta2 = cfg.get_double("model", "beta2", 0.0);
  p.beta3 = cfg.get_double("model", "beta3", 1.0);
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return p;
}

}  // namespace mfwf
