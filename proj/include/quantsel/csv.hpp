#ifndef QUANTSEL_CSV_HPP
#define QUANTSEL_CSV_HPP

#include <string>
#include <vector>

namespace quantsel::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

// RFC-4180 with a required header row. Handles quoted fields, embedded
// separators/newlines and doubled quotes; throws std::runtime_error on
// malformed input.
Table read_file(const std::string& path);
Table parse(const std::string& text);

void write_file(const std::string& path, const Table& table);
std::string format(const Table& table);

// Locale-independent numeric conversion; the entire field must parse.
double to_number(const std::string& field);

// Shortest round-trip decimal representation.
std::string from_number(double value);

}  // namespace quantsel::csv

#endif  // QUANTSEL_CSV_HPP
