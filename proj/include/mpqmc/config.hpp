#pragma once

#include <map>
#include <string>
#include <vector>

#include "mpqmc/errors.hpp"

namespace mpqmc {

// Minimal INI/TOML-style config reader: [section] headers, key = value pairs,
// '#' comments, blank lines. Values are quoted strings, booleans, numbers or
// flat arrays of numbers. Anything else is a ConfigError naming the line.
class ConfigFile {
 public:
  static ConfigFile parse_text(const std::string& text, const std::string& origin = "<string>");
  static ConfigFile parse_file(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  bool has_section(const std::string& section) const;

  // Typed accessors throw ConfigError naming section.key when the entry is
  // missing or has the wrong shape. The *_or forms substitute a default for a
  // missing entry but still reject a type mismatch.
  std::string get_string(const std::string& section, const std::string& key) const;
  double get_number(const std::string& section, const std::string& key) const;
  bool get_bool(const std::string& section, const std::string& key) const;
  std::vector<double> get_list(const std::string& section, const std::string& key) const;

  std::string get_string_or(const std::string& section, const std::string& key,
                            const std::string& fallback) const;
  double get_number_or(const std::string& section, const std::string& key,
                       double fallback) const;
  bool get_bool_or(const std::string& section, const std::string& key, bool fallback) const;

  std::vector<std::string> keys(const std::string& section) const;

 private:
  struct Value {
    enum class Kind { String, Number, Bool, NumberList };
    Kind kind = Kind::String;
    std::string str;
    double num = 0.0;
    bool flag = false;
    std::vector<double> list;
  };

  const Value& lookup(const std::string& section, const std::string& key) const;
  const Value* find(const std::string& section, const std::string& key) const;

  std::string origin_;
  std::map<std::string, std::map<std::string, Value>> sections_;
};

}  // namespace mpqmc
