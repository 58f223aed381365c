#pragma once

#include <string>
#include <vector>

namespace uqxai {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Comma-delimited, first line is the header. Quoted fields are unquoted;
// embedded commas inside quotes are kept. A UTF-8 BOM on the first line is
// stripped.
CsvTable read_csv(const std::string& path);

void write_csv(const std::string& path, const CsvTable& table);

// full round-trip precision for doubles in report files
std::string format_double(double v);

}  // namespace uqxai
