#pragma once

#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>

namespace dapamt {

/// Calendar timestamp with second precision. No time zones; campus records
/// are interpreted in local wall-clock time.
struct Timestamp {
  int year = 1970;
  int month = 1;
  int day = 1;
  int hour = 0;
  int minute = 0;
  int second = 0;

  /// Days since 1970-01-01 for the date part (proleptic Gregorian).
  long civil_days() const {
    int y = year;
    const int m = month;
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                         static_cast<unsigned>(day) - 1u;
    const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
  }

  long seconds_of_day() const { return (hour * 60L + minute) * 60L + second; }

  bool operator<(const Timestamp& o) const {
    if (civil_days() != o.civil_days()) return civil_days() < o.civil_days();
    return seconds_of_day() < o.seconds_of_day();
  }
};

/// Accepts "YYYY-MM-DD HH:MM:SS", "YYYY-MM-DDTHH:MM:SS", and the same
/// without seconds. A bare "YYYY-MM-DD" parses as midnight.
inline Timestamp parse_timestamp(const std::string& s) {
  Timestamp t;
  char sep = 0;
  int n = std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%d", &t.year, &t.month, &t.day,
                      &sep, &t.hour, &t.minute, &t.second);
  if (n != 7) {
    t = Timestamp{};
    n = std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d", &t.year, &t.month, &t.day, &sep,
                    &t.hour, &t.minute);
    if (n != 6) {
      t = Timestamp{};
      n = std::sscanf(s.c_str(), "%d-%d-%d", &t.year, &t.month, &t.day);
      if (n != 3) throw std::invalid_argument("bad timestamp: " + s);
    }
  }
  if (t.month < 1 || t.month > 12 || t.day < 1 || t.day > 31 || t.hour < 0 ||
      t.hour > 23 || t.minute < 0 || t.minute > 59 || t.second < 0 || t.second > 59)
    throw std::invalid_argument("bad timestamp: " + s);
  return t;
}

enum class FootprintKind { library_entry, dormitory_entry };

inline FootprintKind footprint_kind_from(const std::string& s) {
  if (s == "library_entry") return FootprintKind::library_entry;
  if (s == "dormitory_entry") return FootprintKind::dormitory_entry;
  throw std::invalid_argument("unknown footprint kind: " + s);
}

/// One campus-card swipe.
struct FootprintRecord {
  std::string student_id;
  Timestamp timestamp;
  FootprintKind kind;
};

struct StudentProfile {
  std::string student_id;
  std::map<std::string, std::string> attributes;
};

struct GradeRecord {
  std::string student_id;
  int semester_index = 0;
  std::string course_id;
  double credit = 0.0;
  double grade = 0.0;
};

struct BorrowRecord {
  std::string student_id;
  int semester_index = 0;
  int count = 0;
};

}  // namespace dapamt
