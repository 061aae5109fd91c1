#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dapamt/records.hpp"

namespace dapamt {

inline constexpr int kLibrarySlots = 16;   // hourly slots covering 07:00-23:00
inline constexpr int kDormitorySlots = 6;  // hourly slots covering 18:00-24:00
inline constexpr int kCourseStatCount = 7;

/// 1-based day number of a timestamp within an observation window whose
/// first calendar day is `start` (the start date itself is day 1).
inline int day_index(const Timestamp& start, const Timestamp& ts) {
  return static_cast<int>(ts.civil_days() - start.civil_days()) + 1;
}

/// Hourly library-entry counts for one student-day. Slot i covers
/// [7+i, 8+i); records outside 07:00-23:00 are dropped.
inline std::array<int, kLibrarySlots> bin_library_day(
    const std::vector<FootprintRecord>& records) {
  std::array<int, kLibrarySlots> counts{};
  for (const auto& r : records) {
    const int h = r.timestamp.hour;
    if (h >= 7 && h < 23) counts[static_cast<std::size_t>(h - 7)] += 1;
  }
  return counts;
}

/// Going-back-to-the-dormitory indicator for one student-day: the latest
/// record of the day sets the slot for its hour if it falls in 18:00-24:00,
/// otherwise the row stays all zero.
inline std::array<int, kDormitorySlots> bin_dormitory_day(
    const std::vector<FootprintRecord>& records) {
  std::array<int, kDormitorySlots> row{};
  if (records.empty()) return row;
  const FootprintRecord* last = &records.front();
  for (const auto& r : records)
    if (last->timestamp < r.timestamp) last = &r;
  const int h = last->timestamp.hour;
  if (h >= 18 && h < 24) row[static_cast<std::size_t>(h - 18)] = 1;
  return row;
}

/// Credit-weighted average grade over one student-semester.
inline double compute_wag(const std::vector<GradeRecord>& records) {
  if (records.empty())
    throw std::invalid_argument("compute_wag: no grade records");
  double num = 0.0, den = 0.0;
  for (const auto& r : records) {
    if (r.credit <= 0.0)
      throw std::invalid_argument("compute_wag: nonpositive credit for " + r.course_id);
    num += r.credit * r.grade;
    den += r.credit;
  }
  return num / den;
}

inline int count_failed(const std::vector<GradeRecord>& records,
                        double pass_mark = 60.0) {
  if (records.empty())
    throw std::invalid_argument("count_failed: no grade records");
  int n = 0;
  for (const auto& r : records)
    if (r.grade < pass_mark) ++n;
  return n;
}

/// Descriptive statistics of one course's grades across students:
/// minimum, maximum, median, first quartile, third quartile, mean,
/// standard deviation (population denominator). Quantiles interpolate
/// linearly between closest order statistics.
inline std::array<double, kCourseStatCount> course_stats(std::vector<double> grades) {
  if (grades.empty()) throw std::invalid_argument("course_stats: empty input");
  std::sort(grades.begin(), grades.end());
  const std::size_t n = grades.size();
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    return grades[lo] + frac * (grades[hi] - grades[lo]);
  };
  double mean = 0.0;
  for (double g : grades) mean += g;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double g : grades) var += (g - mean) * (g - mean);
  var /= static_cast<double>(n);
  return {grades.front(), grades.back(), quantile(0.5),
          quantile(0.25), quantile(0.75), mean, std::sqrt(var)};
}

enum class AggregateMode { credit_weighted, uniform_mean };

/// Per-feature mean of course feature rows, optionally weighted by credit.
inline std::vector<double> aggregate_courses(
    const std::vector<std::vector<double>>& rows, const std::vector<double>& credits,
    AggregateMode mode) {
  if (rows.empty()) throw std::invalid_argument("aggregate_courses: no rows");
  const std::size_t width = rows.front().size();
  std::vector<double> out(width, 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].size() != width)
      throw std::invalid_argument("aggregate_courses: row length mismatch");
    double w = 1.0;
    if (mode == AggregateMode::credit_weighted) {
      if (k >= credits.size() || credits[k] <= 0.0)
        throw std::invalid_argument("aggregate_courses: bad credit weight");
      w = credits[k];
    }
    for (std::size_t i = 0; i < width; ++i) out[i] += w * rows[k][i];
    total += w;
  }
  for (double& v : out) v /= total;
  return out;
}

}  // namespace dapamt
