#pragma once

// Turns raw footprint/profile/grade/borrow records into a prepared Dataset:
// one labeled sample per student enrolled in the target semester, behavior
// tensors binned per day, per-semester histories, course-derived task
// features, and scalers fit on the training split only.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dapamt/csv.hpp"
#include "dapamt/dataset.hpp"
#include "dapamt/features.hpp"
#include "dapamt/records.hpp"
#include "dapamt/scaler.hpp"

namespace dapamt {

struct IngestConfig {
  std::string semester_start = "2017-02-20";  // calendar day 1 of the window
  int x_days = 63;
  int target_semester = 2;  // labels come from here, histories from before
  double pass_mark = 60.0;
  double train_frac = 0.8;
  double val_frac = 0.1;
  std::uint64_t seed = 1;

  void validate() const {
    parse_timestamp(semester_start);
    if (x_days < 1) throw std::invalid_argument("ingest: x_days > 0");
    if (target_semester < 1) throw std::invalid_argument("ingest: target_semester >= 1");
    if (!(pass_mark > 0.0)) throw std::invalid_argument("ingest: pass_mark > 0");
    if (train_frac <= 0.0 || val_frac < 0.0 || train_frac + val_frac >= 1.0)
      throw std::invalid_argument("ingest: split fractions must leave a test set");
  }
};

inline void from_json(const nlohmann::json& j, IngestConfig& c) {
  c = IngestConfig{};
  c.semester_start = j.value("semester_start", c.semester_start);
  c.x_days = j.value("x_days", c.x_days);
  c.target_semester = j.value("target_semester", c.target_semester);
  c.pass_mark = j.value("pass_mark", c.pass_mark);
  c.train_frac = j.value("train_frac", c.train_frac);
  c.val_frac = j.value("val_frac", c.val_frac);
  c.seed = j.value("seed", c.seed);
  c.validate();
}

inline void to_json(nlohmann::json& j, const IngestConfig& c) {
  j = nlohmann::json{{"semester_start", c.semester_start},
                     {"x_days", c.x_days},
                     {"target_semester", c.target_semester},
                     {"pass_mark", c.pass_mark},
                     {"train_frac", c.train_frac},
                     {"val_frac", c.val_frac},
                     {"seed", c.seed}};
}

struct IngestInput {
  std::vector<FootprintRecord> footprints;
  std::vector<StudentProfile> profiles;
  std::vector<GradeRecord> grades;
  std::vector<BorrowRecord> borrows;
};

struct IngestReport {
  int students = 0;                      // samples emitted
  int dropped_without_profile = 0;       // enrolled at target but no profile row
  long footprints_outside_window = 0;    // day index not in [1, x_days]
  long footprints_unknown_student = 0;   // student not in the emitted set
  std::vector<std::string> warnings;
};

namespace detail {

/// Seeded order of 0..n-1, identical across platforms.
inline std::vector<int> shuffled_ids(int n, std::uint64_t seed) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 rng(seed);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  return idx;
}

inline std::vector<double> to_double_row(const int* begin, int n) {
  std::vector<double> row(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) row[static_cast<std::size_t>(i)] = begin[i];
  return row;
}

}  // namespace detail

/// Assembles the dataset. Students are the ones with at least one grade
/// record in the target semester and a profile row; everything else about
/// them may legitimately be missing (no footprints, no borrows, first
/// semester of enrollment).
inline Dataset build_dataset(const IngestInput& in, const IngestConfig& cfg,
                             IngestReport* report = nullptr) {
  cfg.validate();
  const Timestamp start = parse_timestamp(cfg.semester_start);
  IngestReport rep;

  std::map<std::string, const StudentProfile*> profile_of;
  for (const StudentProfile& p : in.profiles) {
    if (!profile_of.emplace(p.student_id, &p).second)
      throw std::runtime_error("duplicate profile for student " + p.student_id);
  }

  // grades split per student-semester, and per course restricted to history
  // semesters (these feed the course statistics features)
  std::map<std::pair<std::string, int>, std::vector<GradeRecord>> grades_of;
  std::map<std::string, std::vector<double>> course_history;
  for (const GradeRecord& g : in.grades) {
    grades_of[{g.student_id, g.semester_index}].push_back(g);
    if (g.semester_index < cfg.target_semester) course_history[g.course_id].push_back(g.grade);
  }
  std::map<std::string, int> course_failures;
  for (const GradeRecord& g : in.grades)
    if (g.semester_index < cfg.target_semester && g.grade < cfg.pass_mark)
      ++course_failures[g.course_id];

  std::map<std::pair<std::string, int>, int> borrows_of;
  for (const BorrowRecord& b : in.borrows) {
    const std::pair<std::string, int> key{b.student_id, b.semester_index};
    if (!borrows_of.emplace(key, b.count).second)
      throw std::runtime_error("duplicate borrow record for student " + b.student_id +
                               " semester " + std::to_string(b.semester_index));
  }

  // the student universe, sorted for determinism
  std::vector<std::string> ids;
  for (const auto& [key, records] : grades_of) {
    if (key.second != cfg.target_semester) continue;
    if (!profile_of.count(key.first)) {
      ++rep.dropped_without_profile;
      continue;
    }
    ids.push_back(key.first);
  }
  if (ids.empty()) throw std::runtime_error("ingest: no students with target-semester grades");

  const int n = static_cast<int>(ids.size());
  const int n_train = std::max(
      1, static_cast<int>(std::lround(cfg.train_frac * static_cast<double>(n))));
  const int n_val =
      static_cast<int>(std::lround(cfg.val_frac * static_cast<double>(n)));
  std::vector<std::string> split_of(static_cast<std::size_t>(n));
  {
    const std::vector<int> order = detail::shuffled_ids(n, cfg.seed);
    for (int r = 0; r < n; ++r) {
      const char* s = r < n_train ? "train" : (r < n_train + n_val ? "val" : "test");
      split_of[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = s;
    }
  }

  // categorical vocabulary from training students only; unseen values later
  // encode as an all-zero block
  std::set<std::string> attribute_names;
  for (const auto& [id, p] : profile_of)
    for (const auto& [name, value] : p->attributes) attribute_names.insert(name);
  std::map<std::string, std::vector<std::string>> vocab;
  for (const std::string& name : attribute_names) vocab[name] = {};
  for (int i = 0; i < n; ++i) {
    if (split_of[static_cast<std::size_t>(i)] != "train") continue;
    const StudentProfile& p = *profile_of.at(ids[static_cast<std::size_t>(i)]);
    for (const auto& [name, value] : p.attributes) {
      auto& vals = vocab.at(name);
      if (std::find(vals.begin(), vals.end(), value) == vals.end()) vals.push_back(value);
    }
  }
  int profile_dim = 0;
  for (auto& [name, vals] : vocab) {
    std::sort(vals.begin(), vals.end());
    profile_dim += static_cast<int>(vals.size());
  }
  if (profile_dim == 0) throw std::runtime_error("ingest: empty profile vocabulary");

  // footprints grouped per student-day
  std::set<std::string> id_set(ids.begin(), ids.end());
  std::map<std::pair<std::string, int>, std::vector<FootprintRecord>> day_records;
  for (const FootprintRecord& f : in.footprints) {
    if (!id_set.count(f.student_id)) {
      ++rep.footprints_unknown_student;
      continue;
    }
    const int day = day_index(start, f.timestamp);
    if (day < 1 || day > cfg.x_days) {
      ++rep.footprints_outside_window;
      continue;
    }
    day_records[{f.student_id, day}].push_back(f);
  }

  Dataset ds;
  ds.dims = DataDims{};
  ds.dims.x_days = cfg.x_days;
  ds.dims.profile_dim = profile_dim;
  ds.profile_vocab = vocab;

  for (int i = 0; i < n; ++i) {
    const std::string& id = ids[static_cast<std::size_t>(i)];
    const StudentProfile& prof = *profile_of.at(id);
    TaskSample s;
    s.id = id;
    s.split = split_of[static_cast<std::size_t>(i)];

    for (const auto& [name, vals] : vocab) {
      std::vector<double> block(vals.size(), 0.0);
      const auto it = prof.attributes.find(name);
      if (it != prof.attributes.end()) {
        const auto pos = std::find(vals.begin(), vals.end(), it->second);
        if (pos != vals.end()) block[static_cast<std::size_t>(pos - vals.begin())] = 1.0;
      }
      s.profile.insert(s.profile.end(), block.begin(), block.end());
    }

    for (int day = 1; day <= cfg.x_days; ++day) {
      const auto it = day_records.find({id, day});
      std::vector<FootprintRecord> lib, dorm;
      if (it != day_records.end()) {
        for (const FootprintRecord& f : it->second)
          (f.kind == FootprintKind::library_entry ? lib : dorm).push_back(f);
      }
      const auto lib_bins = bin_library_day(lib);
      const auto dorm_bins = bin_dormitory_day(dorm);
      s.library.push_back(detail::to_double_row(lib_bins.data(), kLibrarySlots));
      s.dormitory.push_back(detail::to_double_row(dorm_bins.data(), kDormitorySlots));
    }

    // per-semester histories, each task independently over the semesters
    // where it was observed
    std::vector<double> wag_hist, books_hist, fails_hist;
    for (int sem = 1; sem < cfg.target_semester; ++sem) {
      const auto git = grades_of.find({id, sem});
      if (git != grades_of.end()) {
        wag_hist.push_back(compute_wag(git->second));
        fails_hist.push_back(count_failed(git->second, cfg.pass_mark));
      }
      const auto bit = borrows_of.find({id, sem});
      if (bit != borrows_of.end()) books_hist.push_back(bit->second);
    }
    s.histories = {wag_hist, books_hist, fails_hist};

    const std::vector<GradeRecord>& target = grades_of.at({id, cfg.target_semester});
    const auto bit = borrows_of.find({id, cfg.target_semester});
    s.labels = {compute_wag(target),
                static_cast<double>(bit != borrows_of.end() ? bit->second : 0),
                static_cast<double>(count_failed(target, cfg.pass_mark))};
    s.has_labels = true;

    // course features for the target enrollment, from earlier semesters of
    // the same courses; a course nobody took before contributes a zero row
    std::vector<std::vector<double>> stat_rows, fail_rows;
    std::vector<double> credits;
    for (const GradeRecord& g : target) {
      const auto hit = course_history.find(g.course_id);
      if (hit == course_history.end()) {
        stat_rows.emplace_back(kCourseStatCount, 0.0);
        fail_rows.emplace_back(kCourseStatCount + 1, 0.0);
      } else {
        const auto stats = course_stats(hit->second);
        stat_rows.emplace_back(stats.begin(), stats.end());
        std::vector<double> row{static_cast<double>(course_failures[g.course_id]) /
                                static_cast<double>(hit->second.size())};
        row.insert(row.end(), stats.begin(), stats.end());
        fail_rows.push_back(std::move(row));
      }
      credits.push_back(g.credit);
    }
    s.task_features = {aggregate_courses(stat_rows, credits, AggregateMode::credit_weighted),
                       {},
                       aggregate_courses(fail_rows, credits, AggregateMode::uniform_mean)};

    ds.students.push_back(std::move(s));
  }

  // scalers from the training split; a task with no training-split history
  // observations gets a degenerate scaler that maps everything to zero
  std::vector<std::vector<double>> lib_rows;
  std::vector<std::vector<double>> hist_values(3), label_values(3);
  std::vector<std::vector<std::vector<double>>> feature_rows(3);
  for (const TaskSample& s : ds.students) {
    if (s.split != "train") continue;
    for (const auto& row : s.library) lib_rows.push_back(row);
    for (int t = 0; t < 3; ++t) {
      const auto ut = static_cast<std::size_t>(t);
      for (double v : s.histories[ut]) hist_values[ut].push_back(v);
      label_values[ut].push_back(s.labels[ut]);
      if (!s.task_features[ut].empty()) feature_rows[ut].push_back(s.task_features[ut]);
    }
  }
  ds.library_scaler = Scaler::fit(ScalerKind::unit_interval, lib_rows);
  for (int t = 0; t < 3; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    if (hist_values[ut].empty()) hist_values[ut].push_back(0.0);
    ds.history_scalers.push_back(
        Scaler::fit_values(ScalerKind::unit_interval, hist_values[ut]));
    ds.label_scalers.push_back(
        Scaler::fit_values(ScalerKind::symmetric_unit, label_values[ut]));
    ds.task_feature_scalers.push_back(
        feature_rows[ut].empty()
            ? std::optional<Scaler>{}
            : std::optional<Scaler>(Scaler::fit(ScalerKind::unit_interval, feature_rows[ut])));
  }

  for (TaskSample& s : ds.students) {
    for (auto& row : s.library) row = ds.library_scaler.apply_row(row);
    for (int t = 0; t < 3; ++t) {
      const auto ut = static_cast<std::size_t>(t);
      for (double& v : s.histories[ut]) v = ds.history_scalers[ut].apply(v);
      s.labels[ut] = ds.label_scalers[ut].apply(s.labels[ut]);
      if (ds.task_feature_scalers[ut])
        s.task_features[ut] = ds.task_feature_scalers[ut]->apply_row(s.task_features[ut]);
    }
  }

  if (rep.dropped_without_profile > 0)
    rep.warnings.push_back("dropped " + std::to_string(rep.dropped_without_profile) +
                           " student(s) enrolled in the target semester without a profile");
  if (rep.footprints_outside_window > 0)
    rep.warnings.push_back(std::to_string(rep.footprints_outside_window) +
                           " footprint(s) fell outside the observation window");
  rep.students = n;
  if (report) *report = rep;
  return ds;
}

}  // namespace dapamt
