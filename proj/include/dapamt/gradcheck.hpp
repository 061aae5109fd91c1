#pragma once

#include <random>
#include <string>
#include <vector>

#include "dapamt/training.hpp"

namespace dapamt {

struct GradcheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  long worst_index = -1;
  long entries_checked = 0;
};

/// Compares backward-pass gradients of the batch training objective (eval
/// mode, so the comparison is deterministic) against central finite
/// differences, entry by entry over every trainable parameter. The error is
/// relative with an absolute floor: |a - n| / max(|a|, |n|, floor), so
/// near-zero gradients are compared absolutely at the floor's scale instead
/// of amplifying finite-difference noise.
inline GradcheckReport gradcheck(const ModelSpec& spec, const std::vector<TaskSample>& batch,
                                 const std::vector<double>& lambdas,
                                 unsigned long long seed, double fd_eps = 1e-5,
                                 double floor = 1e-4) {
  spec.validate();
  if (batch.empty()) throw std::invalid_argument("gradcheck: empty batch");
  ParameterStore params = make_parameters(spec, seed);

  auto loss_value = [&](const ParameterStore& ps) {
    Tape t;
    Params P = bind(t, ps);
    std::mt19937_64 unused_rng(0);
    std::vector<std::vector<Var>> preds;
    std::vector<std::vector<double>> labels;
    for (const TaskSample& s : batch) {
      preds.push_back(forward(t, P, spec, s, Mode::eval, unused_rng).preds);
      labels.push_back(s.labels);
    }
    Var total = total_loss(t, task_losses(t, preds, labels), lambdas);
    return t.value(total).data[0];
  };

  std::map<std::string, Array> analytic;
  {
    Tape t;
    Params P = bind(t, params);
    std::mt19937_64 unused_rng(0);
    std::vector<std::vector<Var>> preds;
    std::vector<std::vector<double>> labels;
    for (const TaskSample& s : batch) {
      preds.push_back(forward(t, P, spec, s, Mode::eval, unused_rng).preds);
      labels.push_back(s.labels);
    }
    Var total = total_loss(t, task_losses(t, preds, labels), lambdas);
    analytic = t.named_gradients(t.backward(total));
  }

  GradcheckReport rep;
  for (auto& [name, value] : params.values()) {
    if (params.is_frozen(name)) continue;
    auto git = analytic.find(name);
    const bool have = git != analytic.end();
    for (std::size_t i = 0; i < value.data.size(); ++i) {
      const double keep = value.data[i];
      value.data[i] = keep + fd_eps;
      const double up = loss_value(params);
      value.data[i] = keep - fd_eps;
      const double down = loss_value(params);
      value.data[i] = keep;
      const double numeric = (up - down) / (2.0 * fd_eps);
      const double a = have ? git->second.data[i] : 0.0;
      const double rel = std::fabs(a - numeric) /
                         std::max({std::fabs(a), std::fabs(numeric), floor});
      ++rep.entries_checked;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = name;
        rep.worst_index = static_cast<long>(i);
      }
    }
  }
  return rep;
}

}  // namespace dapamt
