#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <vector>

namespace deceptkit {

// Streaming reader for delimiter-separated text. In quoted mode fields
// follow RFC 4180 (double-quote escaping, embedded delimiters and newlines);
// in plain mode every line is one record split on the delimiter.
class DelimitedReader {
 public:
  DelimitedReader(std::istream& in, char delimiter, bool quoted);

  // Reads the next record. Returns false at end of input. Throws IngestError
  // on an unterminated quoted field.
  bool next(std::vector<std::string>& fields);

  // 1-based line number where the last returned record started.
  std::size_t record_line() const { return record_line_; }

 private:
  std::istream& in_;
  char delimiter_;
  bool quoted_;
  std::size_t line_ = 0;
  std::size_t record_line_ = 0;
};

// Quotes a field for CSV output when it contains separators or quotes.
std::string csv_escape(const std::string& field);

}  // namespace deceptkit
