#pragma once

// Every CLI output file gets a sibling <output>.manifest.json recording what
// produced it: the command, the fully resolved config, the seed, and the
// input and output paths, with UTC wall-clock bounds.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <string>
#include <vector>

#include <json.hpp>

#include "dapamt/io.hpp"

namespace dapamt {

inline std::string iso8601_utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string manifest_path_for(const std::string& output_path) {
  return output_path + ".manifest.json";
}

struct RunManifest {
  std::string command;
  std::string config_path;  // empty when the run used built-in defaults only
  nlohmann::json config;    // resolved values actually used
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string started_at;
  std::string finished_at;

  nlohmann::json to_json_value() const {
    return nlohmann::json{{"command", command},
                          {"config_path", config_path},
                          {"config", config},
                          {"seed", seed},
                          {"inputs", inputs},
                          {"outputs", outputs},
                          {"started_at", started_at},
                          {"finished_at", finished_at}};
  }

  static RunManifest from_json_value(const nlohmann::json& j) {
    RunManifest m;
    j.at("command").get_to(m.command);
    m.config_path = j.value("config_path", "");
    m.config = j.value("config", nlohmann::json::object());
    m.seed = j.value("seed", std::uint64_t{0});
    j.at("inputs").get_to(m.inputs);
    j.at("outputs").get_to(m.outputs);
    m.started_at = j.value("started_at", "");
    m.finished_at = j.value("finished_at", "");
    return m;
  }

  /// Writes the manifest next to its primary output.
  void save_alongside(const std::string& output_path) const {
    atomic_write_file(manifest_path_for(output_path), to_json_value().dump(2) + "\n");
  }
};

}  // namespace dapamt
