#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dapamt/io.hpp"
#include "dapamt/scaler.hpp"

namespace dapamt {

using json = nlohmann::json;

inline void to_json(json& j, const Scaler& s) {
  j = json{{"kind", scaler_kind_name(s.kind())},
           {"min", s.mins()},
           {"max", s.maxs()}};
}

inline void from_json(const json& j, Scaler& s) {
  s = Scaler(scaler_kind_from(j.at("kind").get<std::string>()),
             j.at("min").get<std::vector<double>>(),
             j.at("max").get<std::vector<double>>());
}

/// One student's full model input in scaled model space, plus the three
/// scaled labels when known.
struct TaskSample {
  std::string id;
  std::string split;  // train | val | test
  std::vector<double> profile;
  std::vector<std::vector<double>> library;    // x_days rows of 16, in [0,1]
  std::vector<std::vector<double>> dormitory;  // x_days rows of 6, in {0,1}
  std::vector<std::vector<double>> histories;  // per task, variable length
  std::vector<std::vector<double>> task_features;  // per task; may be empty
  std::vector<double> labels;                      // per task, in label space
  bool has_labels = false;
};

struct DataDims {
  int x_days = 63;
  std::vector<int> behavior_dims{16, 6};
  int profile_dim = 0;
  int task_count = 3;
  std::vector<int> v_dims{7, 0, 8};  // extra task-feature widths per task

  bool operator==(const DataDims&) const = default;
};

inline void to_json(json& j, const DataDims& d) {
  j = json{{"x_days", d.x_days},
           {"behavior_dims", d.behavior_dims},
           {"profile_dim", d.profile_dim},
           {"task_count", d.task_count},
           {"v_dims", d.v_dims}};
}

inline void from_json(const json& j, DataDims& d) {
  j.at("x_days").get_to(d.x_days);
  j.at("behavior_dims").get_to(d.behavior_dims);
  j.at("profile_dim").get_to(d.profile_dim);
  j.at("task_count").get_to(d.task_count);
  j.at("v_dims").get_to(d.v_dims);
}

/// A fully prepared dataset: scaled tensors per student plus the scalers
/// needed to map predictions back to original units. Synthetic and ingested
/// datasets share this one format.
struct Dataset {
  DataDims dims;
  std::map<std::string, std::vector<std::string>> profile_vocab;
  Scaler library_scaler;                    // 16 features
  std::vector<Scaler> history_scalers;      // one per task
  std::vector<Scaler> label_scalers;        // one per task
  std::vector<std::optional<Scaler>> task_feature_scalers;  // one per task
  std::vector<TaskSample> students;

  std::vector<int> split_indices(const std::string& split) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < students.size(); ++i)
      if (students[i].split == split) out.push_back(static_cast<int>(i));
    return out;
  }

  json to_json_value() const {
    json students_j = json::array();
    for (const TaskSample& s : students) {
      json sj{{"id", s.id},
              {"split", s.split},
              {"profile", s.profile},
              {"library", s.library},
              {"dormitory", s.dormitory},
              {"histories", s.histories},
              {"task_features", s.task_features}};
      if (s.has_labels) sj["labels"] = s.labels;
      students_j.push_back(std::move(sj));
    }
    json scalers{{"library", library_scaler},
                 {"histories", history_scalers},
                 {"labels", label_scalers}};
    json tf = json::array();
    for (const auto& s : task_feature_scalers)
      tf.push_back(s ? json(*s) : json(nullptr));
    scalers["task_features"] = std::move(tf);
    return json{{"format", "dapamt-dataset"},
                {"dims", dims},
                {"profile_vocab", profile_vocab},
                {"scalers", std::move(scalers)},
                {"students", std::move(students_j)}};
  }

  static Dataset from_json_value(const json& j) {
    if (j.value("format", "") != "dapamt-dataset")
      throw std::runtime_error("not a dapamt dataset file");
    Dataset ds;
    j.at("dims").get_to(ds.dims);
    if (j.contains("profile_vocab")) j.at("profile_vocab").get_to(ds.profile_vocab);
    const json& sc = j.at("scalers");
    sc.at("library").get_to(ds.library_scaler);
    sc.at("histories").get_to(ds.history_scalers);
    sc.at("labels").get_to(ds.label_scalers);
    for (const json& t : sc.at("task_features"))
      ds.task_feature_scalers.push_back(
          t.is_null() ? std::optional<Scaler>{} : std::optional<Scaler>(t.get<Scaler>()));
    for (const json& sj : j.at("students")) {
      TaskSample s;
      sj.at("id").get_to(s.id);
      sj.at("split").get_to(s.split);
      sj.at("profile").get_to(s.profile);
      sj.at("library").get_to(s.library);
      sj.at("dormitory").get_to(s.dormitory);
      sj.at("histories").get_to(s.histories);
      sj.at("task_features").get_to(s.task_features);
      if (sj.contains("labels")) {
        sj.at("labels").get_to(s.labels);
        s.has_labels = true;
      }
      ds.students.push_back(std::move(s));
    }
    return ds;
  }

  void save(const std::string& path) const {
    atomic_write_file(path, to_json_value().dump());
  }

  static Dataset load(const std::string& path) {
    return from_json_value(json::parse(read_file(path)));
  }
};

}  // namespace dapamt
