#include "deceptkit/common/csv.hpp"

#include "deceptkit/common/error.hpp"

namespace deceptkit {

DelimitedReader::DelimitedReader(std::istream& in, char delimiter, bool quoted)
    : in_(in), delimiter_(delimiter), quoted_(quoted) {}

bool DelimitedReader::next(std::vector<std::string>& fields) {
  fields.clear();
  std::string line;
  if (!std::getline(in_, line)) return false;
  ++line_;
  record_line_ = line_;
  if (!line.empty() && line.back() == '\r') line.pop_back();

  if (!quoted_) {
    std::size_t start = 0;
    for (;;) {
      const std::size_t pos = line.find(delimiter_, start);
      if (pos == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, pos - start));
      start = pos + 1;
    }
    return true;
  }

  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  std::size_t i = 0;
  for (;;) {
    if (i >= line.size()) {
      if (!in_quotes) break;
      // Quoted field continues on the next physical line.
      if (!std::getline(in_, line)) {
        throw IngestError("unterminated quoted field starting at line " + std::to_string(record_line_));
      }
      ++line_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      field.push_back('\n');
      i = 0;
      continue;
    }
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          i += 2;
          continue;
        }
        in_quotes = false;
        ++i;
        continue;
      }
      field.push_back(c);
      ++i;
      continue;
    }
    if (c == '"' && field.empty() && !field_was_quoted) {
      in_quotes = true;
      field_was_quoted = true;
      ++i;
      continue;
    }
    if (c == delimiter_) {
      fields.push_back(std::move(field));
      field.clear();
      field_was_quoted = false;
      ++i;
      continue;
    }
    field.push_back(c);
    ++i;
  }
  fields.push_back(std::move(field));
  return true;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace deceptkit
