#pragma once

// Seeded synthetic benchmark. A hidden per-department gain turns a student's
// raw activity level into "diligence", diligence drives all three labels, and
// only a department-dependent subset of days carries the activity signal in
// the behavior sequences. That layout gives every model component something
// to earn: profile-aware gates and attention can locate the informative days,
// mean pooling dilutes them, and a history-only model never sees them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dapamt/dataset.hpp"
#include "dapamt/features.hpp"
#include "dapamt/model.hpp"
#include "dapamt/stats.hpp"
#include "dapamt/training.hpp"

namespace dapamt {

struct SynthConfig {
  int num_students = 1000;
  int x_days = 21;
  int t_min = 1;
  int t_max = 3;
  std::vector<int> vocab_sizes{2, 6};  // last field is the department
  double diligence_noise = 0.03;
  int informative_days = 5;
  double behavior_noise = 0.4;
  std::vector<double> task_noise{3.0, 1.2, 0.5};  // label noise per task
  double history_noise = 8.0;
  int books_sign = 1;    // +1 couples borrow counts positively to diligence
  int fails_sign = -1;   // -1 couples failed counts negatively
  double train_frac = 0.6;
  double val_frac = 0.1;
  std::uint64_t seed = 1;

  void validate() const {
    if (num_students <= 0) throw std::invalid_argument("synth: num_students > 0");
    if (x_days <= 0) throw std::invalid_argument("synth: x_days > 0");
    if (t_min < 1 || t_max < t_min) throw std::invalid_argument("synth: bad T range");
    if (vocab_sizes.empty()) throw std::invalid_argument("synth: need profile fields");
    for (int v : vocab_sizes)
      if (v <= 0) throw std::invalid_argument("synth: vocab sizes > 0");
    if (informative_days < 0 || informative_days > x_days)
      throw std::invalid_argument("synth: informative_days in [0, x_days]");
    if (diligence_noise < 0 || behavior_noise < 0 || history_noise < 0)
      throw std::invalid_argument("synth: noise scales >= 0");
    if (task_noise.size() != 3)
      throw std::invalid_argument("synth: task_noise has three entries");
    for (double s : task_noise)
      if (s < 0) throw std::invalid_argument("synth: noise scales >= 0");
    if (std::abs(books_sign) != 1 || std::abs(fails_sign) != 1)
      throw std::invalid_argument("synth: correlation signs are +1 or -1");
    if (train_frac <= 0 || val_frac < 0 || train_frac + val_frac >= 1.0)
      throw std::invalid_argument("synth: split fractions must leave a test set");
  }
};

inline void to_json(nlohmann::json& j, const SynthConfig& c) {
  j = nlohmann::json{{"num_students", c.num_students},
                     {"x_days", c.x_days},
                     {"t_min", c.t_min},
                     {"t_max", c.t_max},
                     {"vocab_sizes", c.vocab_sizes},
                     {"diligence_noise", c.diligence_noise},
                     {"informative_days", c.informative_days},
                     {"behavior_noise", c.behavior_noise},
                     {"task_noise", c.task_noise},
                     {"history_noise", c.history_noise},
                     {"books_sign", c.books_sign},
                     {"fails_sign", c.fails_sign},
                     {"train_frac", c.train_frac},
                     {"val_frac", c.val_frac},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, SynthConfig& c) {
  c = SynthConfig{};
  c.num_students = j.value("num_students", c.num_students);
  c.x_days = j.value("x_days", c.x_days);
  c.t_min = j.value("t_min", c.t_min);
  c.t_max = j.value("t_max", c.t_max);
  c.vocab_sizes = j.value("vocab_sizes", c.vocab_sizes);
  c.diligence_noise = j.value("diligence_noise", c.diligence_noise);
  c.informative_days = j.value("informative_days", c.informative_days);
  c.behavior_noise = j.value("behavior_noise", c.behavior_noise);
  c.task_noise = j.value("task_noise", c.task_noise);
  c.history_noise = j.value("history_noise", c.history_noise);
  c.books_sign = j.value("books_sign", c.books_sign);
  c.fails_sign = j.value("fails_sign", c.fails_sign);
  c.train_frac = j.value("train_frac", c.train_frac);
  c.val_frac = j.value("val_frac", c.val_frac);
  c.seed = j.value("seed", c.seed);
  c.validate();
}

namespace detail {

// Days whose behavior carries the diligence signal. The set slides with the
// department so profile-blind pooling cannot lock onto fixed positions.
inline std::set<int> informative_day_set(int dept, int count, int x_days) {
  std::set<int> days;
  if (count == 0) return days;
  const int spacing = std::max(1, x_days / count);
  for (int k = 0; k < count; ++k) days.insert((dept * 3 + k * spacing) % x_days);
  return days;
}

// Library activity peaks at a department-specific hour slot, so a day's
// content says which department it speaks for.
inline int lib_bump_center(int dept, int dept_count) {
  return dept_count > 1 ? 2 + dept * 12 / (dept_count - 1) : 8;
}

inline double clamped(double v, double lo, double hi) {
  return std::min(hi, std::max(lo, v));
}

inline double nneg_round(double v) {
  return std::max(0.0, static_cast<double>(std::lround(v)));
}

}  // namespace detail

/// Generates a complete scaled dataset. Scalers are fitted on the train split
/// only and then applied everywhere.
inline Dataset generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int n_fields = static_cast<int>(cfg.vocab_sizes.size());
  const int dept_field = n_fields - 1;
  const int dept_count = cfg.vocab_sizes[static_cast<std::size_t>(dept_field)];
  int profile_dim = 0;
  for (int v : cfg.vocab_sizes) profile_dim += v;

  const int n_train = std::max(1, static_cast<int>(std::lround(
                                      cfg.num_students * cfg.train_frac)));
  const int n_val = static_cast<int>(std::lround(cfg.num_students * cfg.val_frac));

  Dataset ds;
  ds.dims.x_days = cfg.x_days;
  ds.dims.behavior_dims = {kLibrarySlots, kDormitorySlots};
  ds.dims.profile_dim = profile_dim;
  ds.dims.task_count = 3;
  ds.dims.v_dims = {kCourseStatCount, 0, kCourseStatCount + 1};
  for (int k = 0; k < n_fields; ++k) {
    const std::string key =
        k == dept_field ? "department" : "attr" + std::to_string(k + 1);
    std::vector<std::string> values;
    for (int v = 0; v < cfg.vocab_sizes[static_cast<std::size_t>(k)]; ++v)
      values.push_back(key + std::to_string(v));
    ds.profile_vocab[key] = std::move(values);
  }

  for (int i = 0; i < cfg.num_students; ++i) {
    TaskSample s;
    s.id = "synth" + std::to_string(i);
    s.split = i < n_train ? "train" : i < n_train + n_val ? "val" : "test";

    std::vector<int> field_values;
    s.profile.assign(static_cast<std::size_t>(profile_dim), 0.0);
    int offset = 0;
    for (int k = 0; k < n_fields; ++k) {
      const int size = cfg.vocab_sizes[static_cast<std::size_t>(k)];
      const int pick = static_cast<int>(rng() % static_cast<std::uint64_t>(size));
      field_values.push_back(pick);
      s.profile[static_cast<std::size_t>(offset + pick)] = 1.0;
      offset += size;
    }
    const int dept = field_values[static_cast<std::size_t>(dept_field)];

    // activity level is what behaviors show; diligence is what grades follow
    const double activity = 0.1 + 0.8 * unit(rng);
    // a second, label-irrelevant level shown on another department's days, so
    // profile-blind pooling mixes the two and cannot tell which one is real
    const double shadow = 0.1 + 0.8 * unit(rng);
    const double gain =
        dept_count > 1 ? 0.6 + 0.8 * dept / (dept_count - 1.0) : 1.0;
    const double diligence = gain * activity + cfg.diligence_noise * gauss(rng);
    const double q = detail::clamped(diligence / 1.26, 0.0, 1.0);

    const int shadow_dept = (dept + dept_count / 2) % dept_count;
    const std::set<int> marked =
        detail::informative_day_set(dept, cfg.informative_days, cfg.x_days);
    std::set<int> decoy =
        detail::informative_day_set(shadow_dept, cfg.informative_days, cfg.x_days);
    for (int d : marked) decoy.erase(d);
    for (int x = 0; x < cfg.x_days; ++x) {
      const bool inf = marked.count(x) > 0;
      const bool shown = inf || decoy.count(x) > 0;
      const double level = inf ? activity : shadow;
      const int center =
          detail::lib_bump_center(inf ? dept : shadow_dept, dept_count);
      std::vector<double> lib(kLibrarySlots, 0.0);
      for (int slot = 0; slot < kLibrarySlots; ++slot) {
        const double bump =
            std::max(0.0, 1.0 - std::abs(slot - center) / 8.0);
        const double mask = 1.0 - std::abs(slot - 8) / 8.0;
        lib[static_cast<std::size_t>(slot)] =
            shown ? detail::nneg_round(level * 6.0 * bump +
                                       cfg.behavior_noise * gauss(rng))
                  : static_cast<double>(rng() % 3) * (mask > 0.4 ? 1.0 : 0.0);
      }
      s.library.push_back(std::move(lib));

      std::vector<double> dorm(kDormitorySlots, 0.0);
      const int slot =
          shown ? static_cast<int>(detail::clamped(std::floor((1.0 - level) * 6.0), 0.0, 5.0))
                : static_cast<int>(rng() % kDormitorySlots);
      dorm[static_cast<std::size_t>(slot)] = 1.0;
      s.dormitory.push_back(std::move(dorm));
    }

    const double wag = detail::clamped(
        20.0 + 70.0 * diligence + cfg.task_noise[0] * gauss(rng), 0.0, 100.0);
    const double books = detail::nneg_round(7.0 + cfg.books_sign * 12.0 * (q - 0.5) +
                                            cfg.task_noise[1] * gauss(rng));
    const double fails = detail::nneg_round(3.0 + cfg.fails_sign * 3.0 * (2.0 * q - 1.0) +
                                            cfg.task_noise[2] * gauss(rng));
    s.labels = {wag, books, fails};
    s.has_labels = true;

    std::uniform_int_distribution<int> t_draw(cfg.t_min, cfg.t_max);
    std::vector<double> wag_hist, books_hist, fails_hist;
    for (int t = t_draw(rng); t > 0; --t)
      wag_hist.push_back(
          detail::clamped(wag + cfg.history_noise * gauss(rng), 0.0, 100.0));
    for (int t = t_draw(rng); t > 0; --t)
      books_hist.push_back(
          detail::nneg_round(books + 0.4 * cfg.history_noise * gauss(rng)));
    for (int t = t_draw(rng); t > 0; --t)
      fails_hist.push_back(
          detail::nneg_round(fails + 0.1 * cfg.history_noise * gauss(rng)));

    auto stats7 = [](const std::vector<double>& v) {
      const auto st = course_stats(v);
      return std::vector<double>(st.begin(), st.end());
    };
    std::vector<double> v1 = stats7(wag_hist);
    double fail_rate = 0.0;
    for (double f : fails_hist) fail_rate += f > 0.0 ? 1.0 : 0.0;
    fail_rate /= static_cast<double>(fails_hist.size());
    std::vector<double> v3{fail_rate};
    for (double x : stats7(fails_hist)) v3.push_back(x);

    s.histories = {std::move(wag_hist), std::move(books_hist), std::move(fails_hist)};
    s.task_features = {std::move(v1), {}, std::move(v3)};
    ds.students.push_back(std::move(s));
  }

  // fit every scaler on the train split, then scale all splits in place
  std::vector<std::vector<double>> lib_rows;
  std::vector<std::vector<double>> hist_values(3), label_values(3);
  std::vector<std::vector<std::vector<double>>> feature_rows(3);
  for (const TaskSample& s : ds.students) {
    if (s.split != "train") continue;
    for (const auto& row : s.library) lib_rows.push_back(row);
    for (int n = 0; n < 3; ++n) {
      const auto un = static_cast<std::size_t>(n);
      for (double v : s.histories[un]) hist_values[un].push_back(v);
      label_values[un].push_back(s.labels[un]);
      if (!s.task_features[un].empty())
        feature_rows[un].push_back(s.task_features[un]);
    }
  }
  ds.library_scaler = Scaler::fit(ScalerKind::unit_interval, lib_rows);
  for (int n = 0; n < 3; ++n) {
    const auto un = static_cast<std::size_t>(n);
    ds.history_scalers.push_back(
        Scaler::fit_values(ScalerKind::unit_interval, hist_values[un]));
    ds.label_scalers.push_back(
        Scaler::fit_values(ScalerKind::symmetric_unit, label_values[un]));
    ds.task_feature_scalers.push_back(
        feature_rows[un].empty()
            ? std::optional<Scaler>{}
            : std::optional<Scaler>(
                  Scaler::fit(ScalerKind::unit_interval, feature_rows[un])));
  }

  for (TaskSample& s : ds.students) {
    for (auto& row : s.library) row = ds.library_scaler.apply_row(row);
    for (int n = 0; n < 3; ++n) {
      const auto un = static_cast<std::size_t>(n);
      for (double& v : s.histories[un]) v = ds.history_scalers[un].apply(v);
      s.labels[un] = ds.label_scalers[un].apply(s.labels[un]);
      if (ds.task_feature_scalers[un])
        s.task_features[un] = ds.task_feature_scalers[un]->apply_row(s.task_features[un]);
    }
  }
  return ds;
}

/// Mean of the historical observations, in original units.
inline double baseline_ha(const std::vector<double>& history) {
  if (history.empty()) throw std::invalid_argument("baseline_ha: empty history");
  double sum = 0.0;
  for (double v : history) sum += v;
  return sum / static_cast<double>(history.size());
}

/// One trainable configuration: a model kind expands to one training run, or
/// to three one-hot runs for the single-task ablation.
struct ModelJob {
  std::string kind;
  std::vector<ModelSpec> specs;
  std::vector<std::vector<double>> lambdas;  // one weight row per spec
};

inline ModelJob build_ablation(const std::string& kind, const ModelSpec& base,
                               const std::vector<double>& lambdas) {
  if (static_cast<int>(lambdas.size()) != base.config.task_count)
    throw std::invalid_argument("build_ablation: lambda count mismatch");
  ModelJob job{kind, {}, {}};
  auto push = [&](Variant v, int task_index, std::vector<double> lam) {
    ModelSpec spec = base;
    spec.variant = v;
    spec.task_index = task_index;
    spec.validate();
    job.specs.push_back(std::move(spec));
    job.lambdas.push_back(std::move(lam));
  };
  if (kind == "full") {
    push(Variant::full, -1, lambdas);
  } else if (kind == "single_task") {
    for (int n = 0; n < base.config.task_count; ++n) {
      std::vector<double> lam(lambdas.size(), 0.0);
      lam[static_cast<std::size_t>(n)] = lambdas[static_cast<std::size_t>(n)];
      push(Variant::single_task, n, std::move(lam));
    }
  } else if (kind == "standard_lstm_gates") {
    push(Variant::standard_lstm_gates, -1, lambdas);
  } else if (kind == "no_soft_attention") {
    push(Variant::no_soft_attention, -1, lambdas);
  } else if (kind == "history_only_lstm") {
    push(Variant::history_only_lstm, -1, lambdas);
  } else {
    throw std::invalid_argument("build_ablation: unknown kind: " + kind);
  }
  return job;
}

struct ModelRunStats {
  std::string kind;
  std::vector<std::vector<double>> mse_per_seed;  // [seed][task]
  std::vector<double> mean_mse;                   // [task]
  std::vector<std::vector<double>> sq_errors;     // [task], pooled over seeds
};

struct ExperimentResult {
  std::vector<std::uint64_t> seeds;
  std::vector<ModelRunStats> models;              // [0] is the full model
  std::vector<std::vector<double>> rel_improvement;  // [variant][task]
  std::vector<std::vector<double>> p_values;         // [variant][task]
  std::vector<std::vector<int>> full_wins;           // [variant][task], seeds won
};

namespace detail {

inline ModelRunStats run_model(const Dataset& ds, const ModelJob& job,
                               const TrainConfig& base_cfg,
                               const std::vector<std::uint64_t>& seeds) {
  const int n_tasks = job.specs.front().config.task_count;
  ModelRunStats stats;
  stats.kind = job.kind;
  stats.sq_errors.assign(static_cast<std::size_t>(n_tasks), {});
  for (std::uint64_t seed : seeds) {
    std::vector<double> seed_mse(static_cast<std::size_t>(n_tasks), 0.0);
    for (std::size_t c = 0; c < job.specs.size(); ++c) {
      const ModelSpec& spec = job.specs[c];
      TrainConfig cfg = base_cfg;
      cfg.seed = seed;
      cfg.lambdas = job.lambdas[c];
      TrainResult trained = train(ds, spec, cfg);
      EvalResult ev = evaluate(spec, trained.params, ds.label_scalers, ds, "test");
      // a single-task copy only speaks for its own task
      for (int n = 0; n < n_tasks; ++n) {
        if (spec.variant == Variant::single_task && spec.task_index != n) continue;
        const auto un = static_cast<std::size_t>(n);
        seed_mse[un] = ev.mse[un];
        stats.sq_errors[un].insert(stats.sq_errors[un].end(),
                                   ev.squared_errors[un].begin(),
                                   ev.squared_errors[un].end());
      }
    }
    stats.mse_per_seed.push_back(std::move(seed_mse));
  }
  stats.mean_mse.assign(static_cast<std::size_t>(n_tasks), 0.0);
  for (const auto& row : stats.mse_per_seed)
    for (int n = 0; n < n_tasks; ++n)
      stats.mean_mse[static_cast<std::size_t>(n)] += row[static_cast<std::size_t>(n)];
  for (double& m : stats.mean_mse) m /= static_cast<double>(seeds.size());
  return stats;
}

}  // namespace detail

/// Trains the full model plus the named variants over the given seeds and
/// compares them on the test split: mean MSE, relative improvement of the
/// full model, t-tests on pooled per-student squared errors, per-seed wins.
inline ExperimentResult run_experiment(const Dataset& ds, const ModelSpec& base,
                                       const std::vector<std::string>& variants,
                                       const TrainConfig& cfg,
                                       const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw std::invalid_argument("run_experiment: need seeds");
  ExperimentResult res;
  res.seeds = seeds;
  res.models.push_back(
      detail::run_model(ds, build_ablation("full", base, cfg.lambdas), cfg, seeds));
  for (const std::string& kind : variants)
    res.models.push_back(
        detail::run_model(ds, build_ablation(kind, base, cfg.lambdas), cfg, seeds));

  const ModelRunStats& full = res.models.front();
  const int n_tasks = base.config.task_count;
  for (std::size_t v = 1; v < res.models.size(); ++v) {
    const ModelRunStats& var = res.models[v];
    std::vector<double> rel(static_cast<std::size_t>(n_tasks), 0.0);
    std::vector<double> pv(static_cast<std::size_t>(n_tasks), 1.0);
    std::vector<int> wins(static_cast<std::size_t>(n_tasks), 0);
    for (int n = 0; n < n_tasks; ++n) {
      const auto un = static_cast<std::size_t>(n);
      if (var.mean_mse[un] != 0.0)
        rel[un] = (var.mean_mse[un] - full.mean_mse[un]) / var.mean_mse[un];
      pv[un] = unpaired_ttest(full.sq_errors[un], var.sq_errors[un]).p;
      for (std::size_t s = 0; s < seeds.size(); ++s)
        if (full.mse_per_seed[s][un] < var.mse_per_seed[s][un]) ++wins[un];
    }
    res.rel_improvement.push_back(std::move(rel));
    res.p_values.push_back(std::move(pv));
    res.full_wins.push_back(std::move(wins));
  }
  return res;
}

inline std::string experiment_report(const ExperimentResult& res) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(4);
  ss << "model";
  const std::size_t n_tasks = res.models.front().mean_mse.size();
  for (std::size_t n = 0; n < n_tasks; ++n) ss << "\tmse_task" << n + 1;
  ss << '\n';
  for (const ModelRunStats& m : res.models) {
    ss << m.kind;
    for (double v : m.mean_mse) ss << '\t' << v;
    ss << '\n';
  }
  for (std::size_t v = 0; v + 1 < res.models.size(); ++v) {
    ss << "full vs " << res.models[v + 1].kind << ":";
    for (std::size_t n = 0; n < n_tasks; ++n)
      ss << " task" << n + 1 << " rel " << 100.0 * res.rel_improvement[v][n]
         << "% p " << res.p_values[v][n] << " wins " << res.full_wins[v][n] << "/"
         << res.seeds.size();
    ss << '\n';
  }
  return ss.str();
}

}  // namespace dapamt
