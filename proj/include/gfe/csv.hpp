#pragma once

// RFC 4180 CSV: comma separated, CRLF or LF line ends, double-quoted fields
// with "" escapes. The first record is the header.

#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace gfe::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column, or -1.
  int column(const std::string& name) const;
};

/// Throws ParseError with the record number on unterminated quotes or ragged rows.
Table read(std::istream& in);
Table read_file(const std::string& path);

std::string quote(const std::string& field);
/// %.17g, so values survive a write/read round trip exactly.
std::string format_double(double value);

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
};

void write_file(const std::string& path, const Table& table);

}  // namespace gfe::csv
