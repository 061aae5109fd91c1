#pragma once

// Readers for the four raw record files. Plain comma-separated text with a
// mandatory header row; none of the fields may contain commas. Every error
// names the file and 1-based line number.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "dapamt/records.hpp"

namespace dapamt {

namespace detail {

[[noreturn]] inline void csv_error(const std::string& file, std::size_t line,
                                   const std::string& what) {
  throw std::runtime_error(file + ":" + std::to_string(line) + ": " + what);
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline double csv_double(const std::string& s, const std::string& file,
                         std::size_t line, const std::string& column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    csv_error(file, line, "bad " + column + " value '" + s + "'");
  }
}

inline int csv_int(const std::string& s, const std::string& file, std::size_t line,
                   const std::string& column) {
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size() || v != static_cast<int>(v)) throw std::invalid_argument(s);
    return static_cast<int>(v);
  } catch (const std::exception&) {
    csv_error(file, line, "bad " + column + " value '" + s + "'");
  }
}

}  // namespace detail

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

/// Splits CSV text into a header and uniform-width rows. Blank lines and a
/// trailing newline are tolerated; \r\n line ends are normalized.
inline CsvTable read_csv(const std::string& text, const std::string& file) {
  CsvTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.size(), text.find('\n', pos));
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (pos > text.size()) break;
      continue;
    }
    std::vector<std::string> fields = detail::split_fields(line);
    if (table.header.empty()) {
      table.header = std::move(fields);
    } else {
      if (fields.size() != table.header.size())
        detail::csv_error(file, line_no,
                          "expected " + std::to_string(table.header.size()) +
                              " fields, got " + std::to_string(fields.size()));
      table.rows.push_back(std::move(fields));
      table.line_numbers.push_back(line_no);
    }
  }
  if (table.header.empty()) detail::csv_error(file, 1, "missing header row");
  return table;
}

namespace detail {

inline void require_header(const CsvTable& t, const std::vector<std::string>& expect,
                           const std::string& file) {
  if (t.header != expect) {
    std::string want;
    for (const auto& h : expect) want += (want.empty() ? "" : ",") + h;
    csv_error(file, 1, "expected header '" + want + "'");
  }
}

}  // namespace detail

inline std::vector<FootprintRecord> parse_footprints(const std::string& text,
                                                     const std::string& file) {
  CsvTable t = read_csv(text, file);
  detail::require_header(t, {"student_id", "timestamp", "kind"}, file);
  std::vector<FootprintRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    try {
      out.push_back({row[0], parse_timestamp(row[1]), footprint_kind_from(row[2])});
    } catch (const std::invalid_argument& e) {
      detail::csv_error(file, t.line_numbers[r], e.what());
    }
  }
  return out;
}

inline std::vector<StudentProfile> parse_profiles(const std::string& text,
                                                  const std::string& file) {
  CsvTable t = read_csv(text, file);
  if (t.header.empty() || t.header[0] != "student_id" || t.header.size() < 2)
    detail::csv_error(file, 1, "expected header 'student_id,<attribute columns>'");
  std::vector<StudentProfile> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    StudentProfile p;
    p.student_id = row[0];
    for (std::size_t c = 1; c < t.header.size(); ++c) p.attributes[t.header[c]] = row[c];
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<GradeRecord> parse_grades(const std::string& text,
                                             const std::string& file) {
  CsvTable t = read_csv(text, file);
  detail::require_header(
      t, {"student_id", "semester_index", "course_id", "credit", "grade"}, file);
  std::vector<GradeRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t line = t.line_numbers[r];
    GradeRecord g{row[0], detail::csv_int(row[1], file, line, "semester_index"), row[2],
                  detail::csv_double(row[3], file, line, "credit"),
                  detail::csv_double(row[4], file, line, "grade")};
    if (g.semester_index < 1) detail::csv_error(file, line, "semester_index must be >= 1");
    if (g.credit <= 0.0) detail::csv_error(file, line, "credit must be positive");
    if (g.grade < 0.0 || g.grade > 100.0)
      detail::csv_error(file, line, "grade must lie in [0, 100]");
    out.push_back(std::move(g));
  }
  return out;
}

inline std::vector<BorrowRecord> parse_borrows(const std::string& text,
                                               const std::string& file) {
  CsvTable t = read_csv(text, file);
  detail::require_header(t, {"student_id", "semester_index", "count"}, file);
  std::vector<BorrowRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t line = t.line_numbers[r];
    BorrowRecord b{row[0], detail::csv_int(row[1], file, line, "semester_index"),
                   detail::csv_int(row[2], file, line, "count")};
    if (b.semester_index < 1) detail::csv_error(file, line, "semester_index must be >= 1");
    if (b.count < 0) detail::csv_error(file, line, "count must be >= 0");
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace dapamt
