#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace dapamt {

/// Architecture hyperparameters. Defaults are the tuned settings reported
/// for the full-scale model.
struct ModelConfig {
  int embed_dim = 30;
  std::vector<int> behavior_hidden{12, 4};  // library, dormitory
  int trend_hidden = 5;
  int unit_fc_dim = 100;
  int num_units = 4;
  double dropout_rate = 0.4;
  int x_days = 63;
  int task_count = 3;
  int attn_dim = 16;

  void validate() const {
    if (embed_dim <= 0 || trend_hidden <= 0 || unit_fc_dim <= 0 || attn_dim <= 0)
      throw std::invalid_argument("ModelConfig: dimensions must be positive");
    for (int h : behavior_hidden)
      if (h <= 0) throw std::invalid_argument("ModelConfig: hidden dims must be positive");
    if (num_units < 1) throw std::invalid_argument("ModelConfig: num_units must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
      throw std::invalid_argument("ModelConfig: dropout_rate must be in [0, 1)");
    if (x_days < 1 || task_count < 1)
      throw std::invalid_argument("ModelConfig: x_days and task_count must be >= 1");
  }

  bool operator==(const ModelConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"embed_dim", c.embed_dim},
                     {"lib_hidden", c.behavior_hidden.at(0)},
                     {"dorm_hidden", c.behavior_hidden.at(1)},
                     {"trend_hidden", c.trend_hidden},
                     {"unit_fc_dim", c.unit_fc_dim},
                     {"num_units", c.num_units},
                     {"dropout_rate", c.dropout_rate},
                     {"x_days", c.x_days},
                     {"task_count", c.task_count},
                     {"attn_dim", c.attn_dim}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c = ModelConfig{};
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.behavior_hidden[0] = j.value("lib_hidden", c.behavior_hidden[0]);
  c.behavior_hidden[1] = j.value("dorm_hidden", c.behavior_hidden[1]);
  c.trend_hidden = j.value("trend_hidden", c.trend_hidden);
  c.unit_fc_dim = j.value("unit_fc_dim", c.unit_fc_dim);
  c.num_units = j.value("num_units", c.num_units);
  c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
  c.x_days = j.value("x_days", c.x_days);
  c.task_count = j.value("task_count", c.task_count);
  c.attn_dim = j.value("attn_dim", c.attn_dim);
  c.validate();
}

/// Optimization settings for one training run.
struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 32;
  int epochs = 50;
  unsigned long long seed = 1;
  std::vector<double> lambdas{1.0, 1.0, 1.0};  // per-task balance weights

  void validate() const {
    if (learning_rate <= 0.0 || epsilon <= 0.0)
      throw std::invalid_argument("TrainConfig: rates must be positive");
    if (batch_size < 1 || epochs < 1)
      throw std::invalid_argument("TrainConfig: batch_size and epochs must be >= 1");
    for (double l : lambdas)
      if (l < 0.0) throw std::invalid_argument("TrainConfig: balance weights must be >= 0");
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"learning_rate", c.learning_rate}, {"beta1", c.beta1},
                     {"beta2", c.beta2},                 {"epsilon", c.epsilon},
                     {"batch_size", c.batch_size},       {"epochs", c.epochs},
                     {"seed", c.seed},                   {"lambdas", c.lambdas}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c = TrainConfig{};
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.lambdas = j.value("lambdas", c.lambdas);
  c.validate();
}

}  // namespace dapamt
