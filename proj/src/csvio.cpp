#include "mpqmc/csvio.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace mpqmc {

std::string csv_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

static void append_row(std::string& out, const std::vector<std::string>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += ',';
    out += csv_escape(row[i]);
  }
  out += '\n';
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::string body;
  append_row(body, header);
  for (const auto& row : rows) {
    if (row.size() != header.size())
      fail(Errc::ConfigError, "csv row width does not match the header");
    append_row(body, row);
  }
  write_text_file(path, body);
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  const std::string body = read_text_file(path);
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    any = true;
    if (quoted) {
      if (c == '"') {
        if (i + 1 < body.size() && body[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        break;
      case '\r':
        break;
      case '\n':
        row.push_back(std::move(field));
        field.clear();
        records.push_back(std::move(row));
        row.clear();
        any = false;
        break;
      default:
        field += c;
    }
  }
  if (quoted) fail(Errc::IoError, path + ": unterminated quoted csv field");
  if (any || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    records.push_back(std::move(row));
  }
  return records;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::IoError, "cannot write " + path);
  out << body;
  if (!out) fail(Errc::IoError, "short write to " + path);
}

}  // namespace mpqmc
