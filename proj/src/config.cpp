#include "mpqmc/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mpqmc {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Strips a trailing comment, ignoring '#' inside quotes.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

bool parse_number(const std::string& s, double& out) {
  const char* p = s.c_str();
  char* end = nullptr;
  out = std::strtod(p, &end);
  return end != p && *end == '\0';
}

}  // namespace

ConfigFile ConfigFile::parse_text(const std::string& text, const std::string& origin) {
  ConfigFile cf;
  cf.origin_ = origin;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int lineno = 0;
  auto where = [&] { return origin + ":" + std::to_string(lineno); };
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(Errc::ConfigError, where() + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) fail(Errc::ConfigError, where() + ": empty section name");
      cf.sections_[section];
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(Errc::ConfigError, where() + ": expected key = value or [section]");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) fail(Errc::ConfigError, where() + ": empty key");
    if (val.empty()) fail(Errc::ConfigError, where() + ": empty value for '" + key + "'");
    auto& sec = cf.sections_[section];
    if (sec.count(key)) fail(Errc::ConfigError, where() + ": duplicate key '" + key + "'");

    Value v;
    if (val.front() == '"') {
      if (val.size() < 2 || val.back() != '"')
        fail(Errc::ConfigError, where() + ": unterminated string");
      v.kind = Value::Kind::String;
      v.str = val.substr(1, val.size() - 2);
    } else if (val == "true" || val == "false") {
      v.kind = Value::Kind::Bool;
      v.flag = (val == "true");
    } else if (val.front() == '[') {
      if (val.back() != ']') fail(Errc::ConfigError, where() + ": unterminated array");
      v.kind = Value::Kind::NumberList;
      std::string inner = trim(val.substr(1, val.size() - 2));
      if (!inner.empty()) {
        std::istringstream items(inner);
        std::string item;
        while (std::getline(items, item, ',')) {
          double x = 0.0;
          if (!parse_number(trim(item), x))
            fail(Errc::ConfigError, where() + ": non-numeric array element '" + trim(item) + "'");
          v.list.push_back(x);
        }
      }
    } else {
      if (!parse_number(val, v.num))
        fail(Errc::ConfigError, where() + ": unrecognized value '" + val + "'");
      v.kind = Value::Kind::Number;
    }
    sec.emplace(key, std::move(v));
  }
  return cf;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::ConfigError, "cannot read config file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_text(os.str(), path);
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

bool ConfigFile::has_section(const std::string& section) const {
  return sections_.count(section) != 0;
}

const ConfigFile::Value* ConfigFile::find(const std::string& section,
                                          const std::string& key) const {
  auto sit = sections_.find(section);
  if (sit == sections_.end()) return nullptr;
  auto kit = sit->second.find(key);
  return kit == sit->second.end() ? nullptr : &kit->second;
}

const ConfigFile::Value& ConfigFile::lookup(const std::string& section,
                                            const std::string& key) const {
  const Value* v = find(section, key);
  if (!v) fail(Errc::ConfigError, origin_ + ": missing " + section + "." + key);
  return *v;
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key) const {
  const Value& v = lookup(section, key);
  if (v.kind != Value::Kind::String)
    fail(Errc::ConfigError, origin_ + ": " + section + "." + key + " is not a string");
  return v.str;
}

double ConfigFile::get_number(const std::string& section, const std::string& key) const {
  const Value& v = lookup(section, key);
  if (v.kind != Value::Kind::Number)
    fail(Errc::ConfigError, origin_ + ": " + section + "." + key + " is not a number");
  return v.num;
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key) const {
  const Value& v = lookup(section, key);
  if (v.kind != Value::Kind::Bool)
    fail(Errc::ConfigError, origin_ + ": " + section + "." + key + " is not a boolean");
  return v.flag;
}

std::vector<double> ConfigFile::get_list(const std::string& section,
                                         const std::string& key) const {
  const Value& v = lookup(section, key);
  if (v.kind == Value::Kind::NumberList) return v.list;
  if (v.kind == Value::Kind::Number) return {v.num};  // a scalar is a length-1 list
  fail(Errc::ConfigError, origin_ + ": " + section + "." + key + " is not a numeric list");
}

std::string ConfigFile::get_string_or(const std::string& section, const std::string& key,
                                      const std::string& fallback) const {
  return find(section, key) ? get_string(section, key) : fallback;
}

double ConfigFile::get_number_or(const std::string& section, const std::string& key,
                                 double fallback) const {
  return find(section, key) ? get_number(section, key) : fallback;
}

bool ConfigFile::get_bool_or(const std::string& section, const std::string& key,
                             bool fallback) const {
  return find(section, key) ? get_bool(section, key) : fallback;
}

std::vector<std::string> ConfigFile::keys(const std::string& section) const {
  std::vector<std::string> out;
  auto sit = sections_.find(section);
  if (sit == sections_.end()) return out;
  for (const auto& [k, v] : sit->second) out.push_back(k);
  return out;
}

}  // namespace mpqmc
