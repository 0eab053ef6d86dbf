#pragma once

#include <string>
#include <vector>

#include "mpqmc/errors.hpp"

namespace mpqmc {

// Shortest exact decimal form of a double: 17 significant digits, dot
// separator, locale-independent. Round-trips through strtod bit for bit.
std::string csv_double(double x);

// RFC-4180-style escaping: fields containing commas, quotes or line breaks
// are quoted, embedded quotes doubled. Rows end with a bare newline.
std::string csv_escape(const std::string& field);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Parses a CSV file produced by write_csv (quotes, doubled quotes and
// embedded line breaks included). Returns all records, header first.
std::vector<std::vector<std::string>> read_csv(const std::string& path);

// Whole-file helpers used for byte-identity checks and small outputs.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& body);

}  // namespace mpqmc
