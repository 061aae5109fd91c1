#pragma once

#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dapamt/model.hpp"

namespace dapamt {

/// Mean squared error per task over one batch, as graph nodes so backward
/// sees the whole objective.
inline std::vector<Var> task_losses(Tape& t, const std::vector<std::vector<Var>>& preds,
                                    const std::vector<std::vector<double>>& labels) {
  if (preds.empty()) throw std::invalid_argument("task_losses: empty batch");
  if (labels.size() != preds.size())
    throw std::invalid_argument("task_losses: prediction/label count mismatch");
  const std::size_t batch = preds.size();
  const std::size_t n_tasks = preds.front().size();
  std::vector<Var> out;
  out.reserve(n_tasks);
  for (std::size_t n = 0; n < n_tasks; ++n) {
    Var acc{};
    for (std::size_t b = 0; b < batch; ++b) {
      if (preds[b].size() != n_tasks || labels[b].size() != n_tasks)
        throw std::invalid_argument("task_losses: ragged batch");
      Var err = t.sub(preds[b][n], t.constant(Array::scalar(labels[b][n])));
      Var sq = t.sum_of_squares(err);
      acc = (b == 0) ? sq : t.add(acc, sq);
    }
    out.push_back(t.scale(acc, 1.0 / static_cast<double>(batch)));
  }
  return out;
}

/// Weighted sum of the per-task losses.
inline Var total_loss(Tape& t, const std::vector<Var>& losses,
                      const std::vector<double>& lambdas) {
  if (losses.empty() || losses.size() != lambdas.size())
    throw std::invalid_argument("total_loss: loss/weight count mismatch");
  Var acc = t.scale(losses[0], lambdas[0]);
  for (std::size_t n = 1; n < losses.size(); ++n)
    acc = t.add(acc, t.scale(losses[n], lambdas[n]));
  return acc;
}

struct AdamState {
  std::map<std::string, Array> m, v;
  long step = 0;
};

/// One bias-corrected Adam update over every trainable parameter. Frozen
/// parameters are skipped; every other parameter must have a gradient.
inline void adam_step(ParameterStore& params, const std::map<std::string, Array>& grads,
                      AdamState& state, const TrainConfig& cfg) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (auto& [name, value] : params.values()) {
    if (params.is_frozen(name)) continue;
    auto git = grads.find(name);
    if (git == grads.end())
      throw std::runtime_error("adam_step: missing gradient for " + name);
    const Array& g = git->second;
    if (g.shape != value.shape)
      throw std::runtime_error("adam_step: gradient shape mismatch for " + name);
    Array& m = state.m.try_emplace(name, Array::zeros(value.shape)).first->second;
    Array& v = state.v.try_emplace(name, Array::zeros(value.shape)).first->second;
    for (std::size_t i = 0; i < value.data.size(); ++i) {
      m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g.data[i];
      v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g.data[i] * g.data[i];
      const double m_hat = m.data[i] / bc1;
      const double v_hat = v.data[i] / bc2;
      value.data[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

struct EpochLoss {
  int epoch = 0;
  std::vector<double> task;
  double total = 0.0;
};

struct TrainResult {
  ParameterStore params;
  std::vector<EpochLoss> log;
  int best_epoch = 0;      // 0 when no validation split exists
  double best_val = 0.0;   // scaled-space validation loss at best_epoch
};

namespace detail {

// Stable Fisher-Yates; std::shuffle's draw order is not pinned by the
// standard, and checkpoints must reproduce bitwise.
inline void shuffle_indices(std::vector<int>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[rng() % i]);
}

// Scaled-space weighted loss of a sample set in eval mode, plain numbers.
inline double scaled_loss(const ModelSpec& spec, const ParameterStore& params,
                          const Dataset& ds, const std::vector<int>& idx,
                          const std::vector<double>& lambdas) {
  std::vector<double> per_task(static_cast<std::size_t>(spec.config.task_count), 0.0);
  std::mt19937_64 unused_rng(0);
  for (int i : idx) {
    const TaskSample& s = ds.students[static_cast<std::size_t>(i)];
    Tape t;
    Params P = bind(t, params);
    ForwardVars f = forward(t, P, spec, s, Mode::eval, unused_rng);
    for (std::size_t n = 0; n < per_task.size(); ++n) {
      const double e = t.value(f.preds[n]).data[0] - s.labels[n];
      per_task[n] += e * e;
    }
  }
  double total = 0.0;
  for (std::size_t n = 0; n < per_task.size(); ++n)
    total += lambdas[n] * per_task[n] / static_cast<double>(idx.size());
  return total;
}

}  // namespace detail

/// Mini-batch training with Adam. Batches reshuffle every epoch under the
/// run seed; when the dataset has a validation split the best-validation
/// parameters are returned, otherwise the final ones.
inline TrainResult train(const Dataset& ds, const ModelSpec& spec,
                         const TrainConfig& cfg) {
  spec.validate();
  cfg.validate();
  if (static_cast<int>(cfg.lambdas.size()) != spec.config.task_count)
    throw std::invalid_argument("train: lambda count must match task count");

  std::vector<int> train_idx = ds.split_indices("train");
  if (train_idx.empty()) throw std::runtime_error("train: no training samples");
  const std::vector<int> val_idx = ds.split_indices("val");
  for (int i : train_idx)
    if (!ds.students[static_cast<std::size_t>(i)].has_labels)
      throw std::runtime_error("train: unlabeled training sample " +
                               ds.students[static_cast<std::size_t>(i)].id);

  TrainResult res{make_parameters(spec, cfg.seed), {}, 0,
                  std::numeric_limits<double>::infinity()};
  ParameterStore best = res.params;
  AdamState adam;
  std::mt19937_64 rng(cfg.seed ^ 0xD1B54A32D192ED03ULL);
  const int n_tasks = spec.config.task_count;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    detail::shuffle_indices(train_idx, rng);
    EpochLoss ep{epoch, std::vector<double>(static_cast<std::size_t>(n_tasks), 0.0), 0.0};

    int batch_no = 0;
    for (std::size_t start = 0; start < train_idx.size();
         start += static_cast<std::size_t>(cfg.batch_size), ++batch_no) {
      const std::size_t stop =
          std::min(train_idx.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Tape t;
      Params P = bind(t, res.params);
      std::vector<std::vector<Var>> preds;
      std::vector<std::vector<double>> labels;
      for (std::size_t k = start; k < stop; ++k) {
        const TaskSample& s = ds.students[static_cast<std::size_t>(train_idx[k])];
        preds.push_back(forward(t, P, spec, s, Mode::train, rng).preds);
        labels.push_back(s.labels);
      }
      std::vector<Var> losses = task_losses(t, preds, labels);
      Var total = total_loss(t, losses, cfg.lambdas);

      const double total_value = t.value(total).data[0];
      if (!std::isfinite(total_value))
        throw std::runtime_error("train: non-finite loss at epoch " +
                                 std::to_string(epoch) + " batch " +
                                 std::to_string(batch_no));

      const double weight =
          static_cast<double>(stop - start) / static_cast<double>(train_idx.size());
      ep.total += weight * total_value;
      for (int n = 0; n < n_tasks; ++n)
        ep.task[static_cast<std::size_t>(n)] +=
            weight * t.value(losses[static_cast<std::size_t>(n)]).data[0];

      auto grads = t.named_gradients(t.backward(total));
      // a parameter can sit out a batch legitimately (every history for a
      // task empty leaves its trend encoder untouched); its gradient is zero
      for (const auto& [name, value] : res.params.values())
        if (!res.params.is_frozen(name)) grads.try_emplace(name, Array::zeros(value.shape));
      adam_step(res.params, grads, adam, cfg);
    }
    res.log.push_back(std::move(ep));

    if (!val_idx.empty()) {
      const double val = detail::scaled_loss(spec, res.params, ds, val_idx, cfg.lambdas);
      if (val < res.best_val) {
        res.best_val = val;
        res.best_epoch = epoch;
        best = res.params;
      }
    }
  }

  if (!val_idx.empty()) res.params = best;
  return res;
}

inline std::string loss_log_csv(const std::vector<EpochLoss>& log) {
  std::ostringstream ss;
  ss << std::setprecision(17);
  ss << "epoch";
  if (!log.empty())
    for (std::size_t n = 0; n < log.front().task.size(); ++n) ss << ",L" << n + 1;
  ss << ",total\n";
  for (const EpochLoss& e : log) {
    ss << e.epoch;
    for (double l : e.task) ss << ',' << l;
    ss << ',' << e.total << '\n';
  }
  return ss.str();
}

struct EvalResult {
  std::vector<double> mse;                           // per task, original units
  std::vector<std::vector<double>> squared_errors;   // per task, per student
  std::vector<std::string> ids;
};

/// Eval-mode predictions de-scaled to original units, squared error per
/// student, MSE per task.
inline EvalResult evaluate(const ModelSpec& spec, const ParameterStore& params,
                           const std::vector<Scaler>& label_scalers, const Dataset& ds,
                           const std::string& split) {
  spec.validate();
  if (static_cast<int>(label_scalers.size()) != spec.config.task_count)
    throw std::invalid_argument("evaluate: label scaler count mismatch");
  std::vector<int> idx = split.empty() ? [&] {
    std::vector<int> all(ds.students.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    return all;
  }()
                                       : ds.split_indices(split);
  if (idx.empty()) throw std::runtime_error("evaluate: no samples in split '" + split + "'");

  const int n_tasks = spec.config.task_count;
  EvalResult out;
  out.mse.assign(static_cast<std::size_t>(n_tasks), 0.0);
  out.squared_errors.assign(static_cast<std::size_t>(n_tasks), {});
  std::mt19937_64 unused_rng(0);
  for (int i : idx) {
    const TaskSample& s = ds.students[static_cast<std::size_t>(i)];
    if (!s.has_labels)
      throw std::runtime_error("evaluate: sample " + s.id + " has no labels");
    Tape t;
    Params P = bind(t, params);
    ForwardVars f = forward(t, P, spec, s, Mode::eval, unused_rng);
    out.ids.push_back(s.id);
    for (int n = 0; n < n_tasks; ++n) {
      const auto un = static_cast<std::size_t>(n);
      const double pred = label_scalers[un].invert(t.value(f.preds[un]).data[0]);
      const double truth = label_scalers[un].invert(s.labels[un]);
      const double sq = (pred - truth) * (pred - truth);
      out.squared_errors[un].push_back(sq);
      out.mse[un] += sq;
    }
  }
  for (double& m : out.mse) m /= static_cast<double>(idx.size());
  return out;
}

}  // namespace dapamt
