#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "dapamt/csv.hpp"
#include "dapamt/ingest.hpp"

using namespace dapamt;

namespace {

Timestamp ts(int y, int mo, int d, int h = 0, int mi = 0, int s = 0) {
  return Timestamp{y, mo, d, h, mi, s};
}

// three students, two semesters of grades, one with footprints
IngestInput small_cohort() {
  IngestInput in;
  for (const char* id : {"s1", "s2", "s3"}) {
    StudentProfile p;
    p.student_id = id;
    p.attributes["gender"] = (id == std::string("s3")) ? "female" : "male";
    p.attributes["major"] = "cs";
    in.profiles.push_back(p);
  }
  // semester 1 history: s1 strong, s2 weak, s3 absent (first enrollment)
  in.grades.push_back({"s1", 1, "calc", 3.0, 80.0});
  in.grades.push_back({"s1", 1, "prog", 3.0, 50.0});
  in.grades.push_back({"s2", 1, "calc", 3.0, 55.0});
  // target semester 2
  in.grades.push_back({"s1", 2, "algo", 3.0, 80.0});
  in.grades.push_back({"s1", 2, "stat", 3.0, 50.0});
  in.grades.push_back({"s2", 2, "algo", 2.0, 70.0});
  in.grades.push_back({"s3", 2, "algo", 2.0, 90.0});
  in.borrows.push_back({"s1", 1, 4});
  in.borrows.push_back({"s1", 2, 6});
  in.borrows.push_back({"s2", 2, 1});
  in.footprints.push_back({"s1", ts(2017, 2, 22, 15, 21, 54), FootprintKind::library_entry});
  in.footprints.push_back({"s1", ts(2017, 2, 22, 21, 3, 0), FootprintKind::dormitory_entry});
  return in;
}

IngestConfig small_config() {
  IngestConfig cfg;
  cfg.semester_start = "2017-02-20";
  cfg.x_days = 5;
  cfg.target_semester = 2;
  cfg.train_frac = 0.34;  // 3 students -> 1 train, 1 val, 1 test
  cfg.val_frac = 0.33;
  cfg.seed = 7;
  return cfg;
}

const TaskSample& by_id(const Dataset& ds, const std::string& id) {
  for (const TaskSample& s : ds.students)
    if (s.id == id) return s;
  FAIL("no student " + id);
  return ds.students.front();
}

}  // namespace

TEST_CASE("read_csv splits header and rows") {
  const CsvTable t = read_csv("a,b\r\n1,2\n\n3,4\n", "x.csv");
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0] == std::vector<std::string>{"1", "2"});
  CHECK(t.rows[1] == std::vector<std::string>{"3", "4"});
  CHECK(t.line_numbers == std::vector<std::size_t>{2, 4});

  CHECK_THROWS_WITH(read_csv("a,b\n1,2,3\n", "x.csv"),
                    "x.csv:2: expected 2 fields, got 3");
  CHECK_THROWS_WITH(read_csv("", "x.csv"), "x.csv:1: missing header row");
}

TEST_CASE("parse_footprints reads rows and names bad lines") {
  const auto recs = parse_footprints(
      "student_id,timestamp,kind\n"
      "s1,2017-02-22T15:21:54,library_entry\n"
      "s2,2017-03-01 08:05,dormitory_entry\n",
      "footprints.csv");
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].student_id == "s1");
  CHECK(recs[0].timestamp.hour == 15);
  CHECK(recs[0].kind == FootprintKind::library_entry);
  CHECK(recs[1].timestamp.minute == 5);
  CHECK(recs[1].kind == FootprintKind::dormitory_entry);

  CHECK_THROWS_WITH(parse_footprints("student_id,timestamp,kind\ns1,yesterday,library_entry\n",
                                     "footprints.csv"),
                    Catch::Matchers::StartsWith("footprints.csv:2: bad timestamp"));
  CHECK_THROWS_WITH(parse_footprints("student_id,timestamp,kind\ns1,2017-01-01,gym\n",
                                     "footprints.csv"),
                    "footprints.csv:2: unknown footprint kind: gym");
  CHECK_THROWS_WITH(parse_footprints("id,when,kind\n", "footprints.csv"),
                    "footprints.csv:1: expected header 'student_id,timestamp,kind'");
}

TEST_CASE("parse_profiles takes attribute names from the header") {
  const auto profs = parse_profiles(
      "student_id,gender,major\n"
      "s1,male,cs\n"
      "s2,female,math\n",
      "profiles.csv");
  REQUIRE(profs.size() == 2);
  CHECK(profs[0].student_id == "s1");
  CHECK(profs[0].attributes.at("gender") == "male");
  CHECK(profs[1].attributes.at("major") == "math");

  CHECK_THROWS_WITH(parse_profiles("student_id\n", "profiles.csv"),
                    "profiles.csv:1: expected header 'student_id,<attribute columns>'");
}

TEST_CASE("parse_grades validates fields") {
  const auto g = parse_grades(
      "student_id,semester_index,course_id,credit,grade\n"
      "s1,1,calc,3.5,87.5\n",
      "grades.csv");
  REQUIRE(g.size() == 1);
  CHECK(g[0].semester_index == 1);
  CHECK(g[0].credit == 3.5);
  CHECK(g[0].grade == 87.5);

  const std::string head = "student_id,semester_index,course_id,credit,grade\n";
  CHECK_THROWS_WITH(parse_grades(head + "s1,1,calc,x,80\n", "grades.csv"),
                    "grades.csv:2: bad credit value 'x'");
  CHECK_THROWS_WITH(parse_grades(head + "s1,0,calc,3,80\n", "grades.csv"),
                    "grades.csv:2: semester_index must be >= 1");
  CHECK_THROWS_WITH(parse_grades(head + "s1,1,calc,0,80\n", "grades.csv"),
                    "grades.csv:2: credit must be positive");
  CHECK_THROWS_WITH(parse_grades(head + "s1,1,calc,3,120\n", "grades.csv"),
                    "grades.csv:2: grade must lie in [0, 100]");
  CHECK_THROWS_WITH(parse_grades(head + "s1,1,calc,3,80\ns2,2,calc,3\n", "grades.csv"),
                    "grades.csv:3: expected 5 fields, got 4");
}

TEST_CASE("parse_borrows validates fields") {
  const auto b = parse_borrows("student_id,semester_index,count\ns1,2,14\n", "borrows.csv");
  REQUIRE(b.size() == 1);
  CHECK(b[0].count == 14);

  const std::string head = "student_id,semester_index,count\n";
  CHECK_THROWS_WITH(parse_borrows(head + "s1,2,-1\n", "borrows.csv"),
                    "borrows.csv:2: count must be >= 0");
  CHECK_THROWS_WITH(parse_borrows(head + "s1,2,3.5\n", "borrows.csv"),
                    "borrows.csv:2: bad count value '3.5'");
}

TEST_CASE("ingest config validates and round trips") {
  IngestConfig cfg;
  cfg.validate();

  nlohmann::json j = cfg;
  const auto back = j.get<IngestConfig>();
  CHECK(back.semester_start == cfg.semester_start);
  CHECK(back.x_days == cfg.x_days);
  CHECK(back.seed == cfg.seed);

  const auto partial = nlohmann::json{{"x_days", 21}, {"seed", 9}}.get<IngestConfig>();
  CHECK(partial.x_days == 21);
  CHECK(partial.seed == 9);
  CHECK(partial.target_semester == 2);

  cfg.x_days = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = IngestConfig{};
  cfg.semester_start = "not a date";
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = IngestConfig{};
  cfg.train_frac = 0.9;
  cfg.val_frac = 0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("build_dataset bins footprints into day and slot") {
  IngestInput in = small_cohort();
  IngestConfig cfg = small_config();
  // single student so it must land in train and anchor the scalers
  IngestInput solo;
  solo.profiles.push_back(in.profiles[0]);
  for (const auto& g : in.grades)
    if (g.student_id == "s1") solo.grades.push_back(g);
  for (const auto& b : in.borrows)
    if (b.student_id == "s1") solo.borrows.push_back(b);
  solo.footprints = in.footprints;

  const Dataset ds = build_dataset(solo, cfg);
  REQUIRE(ds.students.size() == 1);
  const TaskSample& s = ds.students[0];
  CHECK(s.split == "train");
  REQUIRE(s.library.size() == 5);
  REQUIRE(s.dormitory.size() == 5);

  // 2017-02-22 is day 3 of a window starting 2017-02-20; 15:21 is slot 8
  for (int day = 0; day < 5; ++day)
    for (int slot = 0; slot < 16; ++slot) {
      const double raw =
          ds.library_scaler.invert(s.library[static_cast<std::size_t>(day)]
                                            [static_cast<std::size_t>(slot)],
                                   slot);
      CHECK(raw == ((day == 2 && slot == 8) ? 1.0 : 0.0));
    }
  // dormitory record at 21:03 -> slot 3 of day 3
  for (int day = 0; day < 5; ++day)
    for (int slot = 0; slot < 6; ++slot)
      CHECK(s.dormitory[static_cast<std::size_t>(day)][static_cast<std::size_t>(slot)] ==
            ((day == 2 && slot == 3) ? 1.0 : 0.0));
}

TEST_CASE("build_dataset computes labels histories and course features") {
  const Dataset ds = build_dataset(small_cohort(), small_config());
  REQUIRE(ds.students.size() == 3);
  CHECK(ds.dims.x_days == 5);
  CHECK(ds.dims.v_dims == std::vector<int>{7, 0, 8});

  const TaskSample& s1 = by_id(ds, "s1");
  REQUIRE(s1.has_labels);
  // compare in scaled space: a one-student training split leaves a scaler
  // degenerate, but apply() of the expected raw value still matches exactly
  // target semester: (80,3),(50,3) -> wag 65, one failed course, 6 borrows
  CHECK(s1.labels[0] == ds.label_scalers[0].apply(65.0));
  CHECK(s1.labels[1] == ds.label_scalers[1].apply(6.0));
  CHECK(s1.labels[2] == ds.label_scalers[2].apply(1.0));

  // semester-1 history: wag 65, 4 borrows, 1 fail
  REQUIRE(s1.histories[0].size() == 1);
  REQUIRE(s1.histories[1].size() == 1);
  REQUIRE(s1.histories[2].size() == 1);
  CHECK(s1.histories[0][0] == ds.history_scalers[0].apply(65.0));
  CHECK(s1.histories[1][0] == ds.history_scalers[1].apply(4.0));
  CHECK(s1.histories[2][0] == ds.history_scalers[2].apply(1.0));

  // s3 enrolled for the first time: empty histories, no borrow row -> 0 books
  const TaskSample& s3 = by_id(ds, "s3");
  CHECK(s3.histories[0].empty());
  CHECK(s3.histories[1].empty());
  CHECK(s3.histories[2].empty());
  CHECK(s3.labels[1] == ds.label_scalers[1].apply(0.0));
  CHECK(s3.labels[0] == ds.label_scalers[0].apply(90.0));

  // courses algo and stat were never taught before semester 2, so the course
  // feature rows are all zero for every student
  REQUIRE(s1.task_features[0].size() == 7);
  CHECK(s1.task_features[1].empty());
  REQUIRE(s1.task_features[2].size() == 8);
  if (ds.task_feature_scalers[0]) {
    const auto raw = ds.task_feature_scalers[0]->invert_row(s1.task_features[0]);
    for (double v : raw) CHECK(v == 0.0);
  }
}

TEST_CASE("course features use historical grades of the same course") {
  IngestInput in = small_cohort();
  // make algo an old course: s1 and s2 grades from semester 1 feed its stats
  in.grades.push_back({"s2", 1, "algo", 2.0, 40.0});
  in.grades.push_back({"s1", 1, "algo", 2.0, 80.0});
  IngestConfig cfg = small_config();

  const Dataset ds = build_dataset(in, cfg);
  const TaskSample& s3 = by_id(ds, "s3");
  REQUIRE(ds.task_feature_scalers[0].has_value());
  REQUIRE(ds.task_feature_scalers[2].has_value());

  // s3 takes only algo: v1 is exactly the stats of {40, 80}, by hand
  // min, max, median, Q1, Q3, mean, population std
  const std::vector<double> stats{40.0, 80.0, 60.0, 50.0, 70.0, 60.0, 20.0};
  const auto v1 = ds.task_feature_scalers[0]->apply_row(stats);
  REQUIRE(s3.task_features[0].size() == 7);
  for (std::size_t i = 0; i < 7; ++i) CHECK(s3.task_features[0][i] == v1[i]);

  // one of the two historical takers failed
  std::vector<double> failed_row{0.5};
  failed_row.insert(failed_row.end(), stats.begin(), stats.end());
  const auto v3 = ds.task_feature_scalers[2]->apply_row(failed_row);
  REQUIRE(s3.task_features[2].size() == 8);
  for (std::size_t i = 0; i < 8; ++i) CHECK(s3.task_features[2][i] == v3[i]);
}

TEST_CASE("profile one-hot uses train vocabulary only") {
  IngestInput in = small_cohort();
  IngestConfig cfg = small_config();
  const Dataset ds = build_dataset(in, cfg);

  // exactly one train student defines the vocabulary
  std::string train_id;
  for (const TaskSample& s : ds.students)
    if (s.split == "train") {
      REQUIRE(train_id.empty());
      train_id = s.id;
    }
  REQUIRE_FALSE(train_id.empty());

  int expected_dim = 0;
  for (const auto& [name, vals] : ds.profile_vocab) expected_dim += static_cast<int>(vals.size());
  CHECK(ds.dims.profile_dim == expected_dim);
  CHECK(ds.profile_vocab.at("gender").size() == 1);
  CHECK(ds.profile_vocab.at("major") == std::vector<std::string>{"cs"});

  const std::string train_gender = train_id == "s3" ? "female" : "male";
  for (const TaskSample& s : ds.students) {
    REQUIRE(static_cast<int>(s.profile.size()) == expected_dim);
    const std::string gender = s.id == "s3" ? "female" : "male";
    // vocab iterates alphabetically: gender block first, then major
    CHECK(s.profile[0] == (gender == train_gender ? 1.0 : 0.0));
    CHECK(s.profile[1] == 1.0);  // major cs is shared
  }
}

TEST_CASE("students without footprints get zero behavior tensors") {
  const Dataset ds = build_dataset(small_cohort(), small_config());
  const TaskSample& s2 = by_id(ds, "s2");
  for (const auto& row : s2.library) {
    REQUIRE(row.size() == 16);
    for (double v : row) CHECK(v == 0.0);
  }
  for (const auto& row : s2.dormitory) {
    REQUIRE(row.size() == 6);
    for (double v : row) CHECK(v == 0.0);
  }
}

TEST_CASE("ingest counts window drops and missing profiles") {
  IngestInput in = small_cohort();
  in.footprints.push_back({"s1", ts(2017, 2, 19, 12, 0, 0), FootprintKind::library_entry});
  in.footprints.push_back({"s1", ts(2017, 4, 1, 12, 0, 0), FootprintKind::library_entry});
  in.footprints.push_back({"nobody", ts(2017, 2, 21, 12, 0, 0), FootprintKind::library_entry});
  in.grades.push_back({"ghost", 2, "algo", 3.0, 75.0});

  IngestReport rep;
  const Dataset ds = build_dataset(in, small_config(), &rep);
  CHECK(rep.students == 3);
  CHECK(rep.dropped_without_profile == 1);
  CHECK(rep.footprints_outside_window == 2);
  CHECK(rep.footprints_unknown_student == 1);
  REQUIRE(rep.warnings.size() == 2);
  CHECK(rep.warnings[0].find("without a profile") != std::string::npos);
  CHECK(rep.warnings[1].find("outside the observation window") != std::string::npos);
  for (const TaskSample& s : ds.students) CHECK(s.id != "ghost");

  // records outside the hourly windows are dropped without a warning
  IngestInput quiet = small_cohort();
  quiet.footprints = {{"s1", ts(2017, 2, 21, 5, 30, 0), FootprintKind::library_entry}};
  IngestReport rep2;
  const Dataset ds2 = build_dataset(quiet, small_config(), &rep2);
  CHECK(rep2.footprints_outside_window == 0);
  const TaskSample& s1 = by_id(ds2, "s1");
  for (double v : s1.library[1]) CHECK(v == 0.0);
}

TEST_CASE("ingest splits follow the configured fractions") {
  IngestInput in;
  for (int i = 0; i < 20; ++i) {
    const std::string id = "st" + std::to_string(100 + i);
    StudentProfile p;
    p.student_id = id;
    p.attributes["gender"] = i % 2 ? "male" : "female";
    in.profiles.push_back(p);
    in.grades.push_back({id, 2, "algo", 3.0, 50.0 + i});
  }
  IngestConfig cfg;
  cfg.x_days = 3;
  cfg.train_frac = 0.6;
  cfg.val_frac = 0.2;
  cfg.seed = 3;

  const Dataset ds = build_dataset(in, cfg);
  CHECK(ds.split_indices("train").size() == 12);
  CHECK(ds.split_indices("val").size() == 4);
  CHECK(ds.split_indices("test").size() == 4);

  // deterministic under the same seed, different under another
  const Dataset again = build_dataset(in, cfg);
  CHECK(ds.to_json_value().dump() == again.to_json_value().dump());
  cfg.seed = 4;
  const Dataset other = build_dataset(in, cfg);
  bool moved = false;
  for (std::size_t i = 0; i < ds.students.size(); ++i)
    if (ds.students[i].split != other.students[i].split) moved = true;
  CHECK(moved);
}

TEST_CASE("ingest rejects broken inputs") {
  IngestInput in = small_cohort();
  in.profiles.push_back(in.profiles[0]);
  CHECK_THROWS_WITH(build_dataset(in, small_config()),
                    "duplicate profile for student s1");

  in = small_cohort();
  in.borrows.push_back(in.borrows[0]);
  CHECK_THROWS_WITH(build_dataset(in, small_config()),
                    "duplicate borrow record for student s1 semester 1");

  in = small_cohort();
  in.grades.erase(std::remove_if(in.grades.begin(), in.grades.end(),
                                 [](const GradeRecord& g) { return g.semester_index == 2; }),
                  in.grades.end());
  CHECK_THROWS_WITH(build_dataset(in, small_config()),
                    "ingest: no students with target-semester grades");
}

TEST_CASE("ingested dataset round trips through files") {
  const Dataset ds = build_dataset(small_cohort(), small_config());
  const std::string path = "ingest_roundtrip.json";
  ds.save(path);
  const Dataset back = Dataset::load(path);
  CHECK(ds.to_json_value().dump() == back.to_json_value().dump());
  std::remove(path.c_str());
}
