#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dapamt/array.hpp"

namespace dapamt {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Named model parameters plus the frozen-name set used by ablations.
/// Matrix entries draw from uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)];
/// the draw is seeded per parameter name, so stores built with the same
/// seed agree on every name they share regardless of which other
/// parameters exist.
class ParameterStore {
 public:
  explicit ParameterStore(unsigned long long seed = 0) : seed_(seed) {}

  void matrix(const std::string& name, int rows, int cols) {
    insert(name, fan_in_uniform({rows, cols}, cols, name));
  }

  /// fan_in == 0 gives a zero vector (biases); otherwise uniform init.
  void vector_param(const std::string& name, int len, int fan_in = 0) {
    insert(name, fan_in > 0 ? fan_in_uniform({len}, fan_in, name)
                            : Array::zeros({len}));
  }

  void scalar_param(const std::string& name, double value) {
    insert(name, Array::scalar(value));
  }

  /// Frozen parameters keep their current values through training.
  void freeze(const std::string& name) {
    if (!has(name)) throw std::out_of_range("ParameterStore: unknown parameter " + name);
    frozen_.insert(name);
  }

  void zero_and_freeze(const std::string& name) {
    Array& a = at(name);
    std::fill(a.data.begin(), a.data.end(), 0.0);
    frozen_.insert(name);
  }

  bool has(const std::string& name) const { return values_.count(name) != 0; }

  const Array& get(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end())
      throw std::out_of_range("ParameterStore: unknown parameter " + name);
    return it->second;
  }

  Array& at(const std::string& name) {
    auto it = values_.find(name);
    if (it == values_.end())
      throw std::out_of_range("ParameterStore: unknown parameter " + name);
    return it->second;
  }

  bool is_frozen(const std::string& name) const { return frozen_.count(name) != 0; }
  const std::set<std::string>& frozen() const { return frozen_; }
  const std::map<std::string, Array>& values() const { return values_; }
  std::map<std::string, Array>& values() { return values_; }
  unsigned long long seed() const { return seed_; }
  std::size_t size() const { return values_.size(); }

  bool operator==(const ParameterStore& o) const {
    if (frozen_ != o.frozen_ || values_.size() != o.values_.size()) return false;
    for (const auto& [name, arr] : values_) {
      auto it = o.values_.find(name);
      if (it == o.values_.end() || it->second.shape != arr.shape ||
          it->second.data != arr.data)
        return false;
    }
    return true;
  }

  nlohmann::json to_json_value() const {
    nlohmann::json params(nlohmann::json::value_t::object);
    for (const auto& [name, arr] : values_)
      params[name] = nlohmann::json{{"shape", arr.shape}, {"data", arr.data}};
    return nlohmann::json{{"seed", seed_},
                          {"frozen", std::vector<std::string>(frozen_.begin(), frozen_.end())},
                          {"params", std::move(params)}};
  }

  static ParameterStore from_json_value(const nlohmann::json& j) {
    ParameterStore ps(j.value("seed", 0ULL));
    for (const auto& [name, pj] : j.at("params").items()) {
      Array a(pj.at("shape").get<std::vector<int>>(),
              pj.at("data").get<std::vector<double>>());
      ps.values_.emplace(name, std::move(a));
    }
    for (const auto& f : j.value("frozen", std::vector<std::string>{})) {
      if (!ps.has(f))
        throw std::runtime_error("ParameterStore: frozen name not present: " + f);
      ps.frozen_.insert(f);
    }
    return ps;
  }

 private:
  void insert(const std::string& name, Array a) {
    if (!values_.emplace(name, std::move(a)).second)
      throw std::invalid_argument("ParameterStore: duplicate parameter " + name);
  }

  Array fan_in_uniform(std::vector<int> shape, int fan_in, const std::string& name) const {
    Array a = Array::zeros(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::mt19937_64 rng(fnv1a(name) ^ (seed_ * 0x9E3779B97F4A7C15ULL + 0x2545F4914F6CDD1DULL));
    for (double& v : a.data) {
      // top 53 bits -> [0,1); identical across standard libraries
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      v = (2.0 * u - 1.0) * bound;
    }
    return a;
  }

  unsigned long long seed_ = 0;
  std::map<std::string, Array> values_;
  std::set<std::string> frozen_;
};

}  // namespace dapamt
