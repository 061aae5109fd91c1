#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dapamt/autograd.hpp"
#include "dapamt/config.hpp"
#include "dapamt/dataset.hpp"
#include "dapamt/params.hpp"

namespace dapamt {

/// Model variants: the full architecture plus the four reduced forms used
/// for comparison experiments.
enum class Variant {
  full,
  single_task,          // one task branch live, the other two severed
  standard_lstm_gates,  // profile terms removed from gates and attention
  no_soft_attention,    // uniform mean pooling over days
  history_only_lstm,    // per-task trend encoder plus head, nothing else
};

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::single_task: return "single_task";
    case Variant::standard_lstm_gates: return "standard_lstm_gates";
    case Variant::no_soft_attention: return "no_soft_attention";
    case Variant::history_only_lstm: return "history_only_lstm";
  }
  return "?";
}

inline Variant variant_from(const std::string& s) {
  for (Variant v : {Variant::full, Variant::single_task, Variant::standard_lstm_gates,
                    Variant::no_soft_attention, Variant::history_only_lstm})
    if (s == variant_name(v)) return v;
  throw std::invalid_argument("unknown model variant: " + s);
}

/// Everything needed to lay out parameters and run a forward pass.
struct ModelSpec {
  ModelConfig config;
  DataDims dims;
  Variant variant = Variant::full;
  int task_index = -1;  // live task for single_task, 0-based

  int hcat_dim() const { return config.behavior_hidden[0] + config.behavior_hidden[1]; }
  int repr_dim() const { return config.embed_dim + hcat_dim(); }
  int task_input_dim(int n) const {
    return repr_dim() + config.trend_hidden + dims.v_dims.at(static_cast<std::size_t>(n));
  }

  void validate() const {
    config.validate();
    if (dims.task_count != config.task_count)
      throw std::invalid_argument("ModelSpec: task_count mismatch");
    if (dims.x_days != config.x_days)
      throw std::invalid_argument("ModelSpec: x_days mismatch");
    if (dims.behavior_dims.size() != 2 || dims.behavior_dims[0] <= 0 ||
        dims.behavior_dims[1] <= 0)
      throw std::invalid_argument("ModelSpec: need two positive behavior widths");
    if (static_cast<int>(dims.v_dims.size()) != dims.task_count)
      throw std::invalid_argument("ModelSpec: v_dims count mismatch");
    for (int v : dims.v_dims)
      if (v < 0) throw std::invalid_argument("ModelSpec: negative v_dim");
    if (dims.profile_dim < 1)
      throw std::invalid_argument("ModelSpec: profile_dim must be >= 1");
    const bool single = variant == Variant::single_task;
    if (single != (task_index >= 0 && task_index < config.task_count))
      throw std::invalid_argument(
          "ModelSpec: task_index is required exactly for single_task");
  }

  bool operator==(const ModelSpec&) const = default;
};

inline void to_json(nlohmann::json& j, const ModelSpec& s) {
  j = nlohmann::json{{"config", s.config},
                     {"dims", s.dims},
                     {"variant", variant_name(s.variant)},
                     {"task_index", s.task_index}};
}

inline void from_json(const nlohmann::json& j, ModelSpec& s) {
  j.at("config").get_to(s.config);
  j.at("dims").get_to(s.dims);
  s.variant = variant_from(j.at("variant").get<std::string>());
  s.task_index = j.value("task_index", -1);
  s.validate();
}

namespace detail {

inline std::string task_name(int n) { return std::to_string(n + 1); }

inline void add_lstm_params(ParameterStore& ps, const std::string& prefix, int hidden,
                            int in_dim, int profile_dim) {
  for (const char* g : {"i", "f", "o"}) {
    ps.matrix(prefix + "/W_" + g + "B", hidden, in_dim);
    ps.matrix(prefix + "/W_" + g + "h", hidden, hidden);
    if (profile_dim > 0) ps.matrix(prefix + "/W_" + g + "D", hidden, profile_dim);
    ps.vector_param(prefix + "/b_" + std::string(g), hidden);
  }
  ps.matrix(prefix + "/W_cB", hidden, in_dim);
  ps.matrix(prefix + "/W_ch", hidden, hidden);
  ps.vector_param(prefix + "/b_c", hidden);
}

}  // namespace detail

/// Creates and initializes every parameter the given spec trains or loads.
/// standard_lstm_gates keeps its profile matrices in the store, zeroed and
/// frozen, so checkpoints stay shape-compatible with the full model.
/// single_task freezes (without zeroing) everything owned by the severed
/// tasks.
inline ParameterStore make_parameters(const ModelSpec& spec, unsigned long long seed) {
  spec.validate();
  const ModelConfig& c = spec.config;
  const DataDims& d = spec.dims;
  ParameterStore ps(seed);

  for (int n = 0; n < c.task_count; ++n)
    detail::add_lstm_params(ps, "trend" + detail::task_name(n), c.trend_hidden, 1, 0);

  if (spec.variant == Variant::history_only_lstm) {
    for (int n = 0; n < c.task_count; ++n) {
      ps.vector_param("ho_head" + detail::task_name(n) + "/w", c.trend_hidden,
                      c.trend_hidden);
      ps.scalar_param("ho_head" + detail::task_name(n) + "/b", 0.0);
    }
    return ps;
  }

  ps.matrix("embed/W", c.embed_dim, d.profile_dim);
  detail::add_lstm_params(ps, "plstm_lib", c.behavior_hidden[0], d.behavior_dims[0],
                          c.embed_dim);
  detail::add_lstm_params(ps, "plstm_dorm", c.behavior_hidden[1], d.behavior_dims[1],
                          c.embed_dim);

  if (spec.variant != Variant::no_soft_attention) {
    ps.matrix("attn/W_h", c.attn_dim, spec.hcat_dim());
    ps.matrix("attn/W_D", c.attn_dim, c.embed_dim);
    ps.vector_param("attn/b", c.attn_dim);
    ps.vector_param("attn/w_score", c.attn_dim, c.attn_dim);
  }

  for (int l = 1; l <= c.num_units; ++l)
    for (int n = 0; n < c.task_count; ++n) {
      const std::string base =
          "unit" + std::to_string(l) + "/task" + detail::task_name(n);
      ps.matrix(base + "/W", c.unit_fc_dim,
                l == 1 ? spec.task_input_dim(n) : c.unit_fc_dim);
      ps.vector_param(base + "/b", c.unit_fc_dim);
      ps.scalar_param(base + "/prelu", 0.25);
    }

  for (int n = 0; n < c.task_count; ++n) {
    ps.vector_param("head" + detail::task_name(n) + "/w", c.unit_fc_dim, c.unit_fc_dim);
    ps.scalar_param("head" + detail::task_name(n) + "/b", 0.0);
  }

  if (spec.variant == Variant::standard_lstm_gates) {
    for (const char* prefix : {"plstm_lib", "plstm_dorm"})
      for (const char* g : {"i", "f", "o"})
        ps.zero_and_freeze(std::string(prefix) + "/W_" + g + "D");
    ps.zero_and_freeze("attn/W_D");
  }

  if (spec.variant == Variant::single_task) {
    std::vector<std::string> off;
    for (int n = 0; n < c.task_count; ++n) {
      if (n == spec.task_index) continue;
      off.push_back("trend" + detail::task_name(n) + "/");
      off.push_back("head" + detail::task_name(n) + "/");
      for (int l = 1; l <= c.num_units; ++l)
        off.push_back("unit" + std::to_string(l) + "/task" + detail::task_name(n) + "/");
    }
    for (const auto& [name, arr] : ps.values()) {
      (void)arr;
      for (const std::string& prefix : off)
        if (name.rfind(prefix, 0) == 0) ps.freeze(name);
    }
  }

  return ps;
}

/// Parameter bindings for one tape: each parameter becomes exactly one
/// named leaf, so per-sample gradients accumulate in-graph across a batch.
using Params = std::map<std::string, Var>;

inline Params bind(Tape& tape, const ParameterStore& store) {
  Params out;
  for (const auto& [name, arr] : store.values()) out.emplace(name, tape.leaf(arr, name));
  return out;
}

inline Var param(const Params& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw std::out_of_range("unbound parameter: " + name);
  return it->second;
}

struct LstmState {
  Var h, c;
};

inline LstmState zero_state(Tape& t, int hidden) {
  return {t.constant(Array::zeros({hidden})), t.constant(Array::zeros({hidden}))};
}

inline Var embed_profile(Tape& t, const Params& P, Var one_hot) {
  return t.matmul(param(P, "embed/W"), one_hot);
}

/// One recurrence step. With a profile embedding present this is the
/// profile-aware cell: the three gates see the profile, the candidate
/// path deliberately does not. Without it this is a standard LSTM step.
inline LstmState plstm_step(Tape& t, const Params& P, const std::string& prefix, Var x,
                            LstmState prev, std::optional<Var> profile) {
  auto gate = [&](const char* g) {
    Var z = t.add(t.matmul(param(P, prefix + "/W_" + g + "B"), x),
                  t.matmul(param(P, prefix + "/W_" + g + "h"), prev.h));
    if (profile)
      z = t.add(z, t.matmul(param(P, prefix + "/W_" + g + "D"), *profile));
    return t.sigmoid(t.add(z, param(P, prefix + "/b_" + std::string(g))));
  };
  Var i = gate("i"), f = gate("f"), o = gate("o");
  Var candidate = t.tanh(t.add(t.add(t.matmul(param(P, prefix + "/W_cB"), x),
                                     t.matmul(param(P, prefix + "/W_ch"), prev.h)),
                               param(P, prefix + "/b_c")));
  Var c = t.add(t.mul(f, prev.c), t.mul(i, candidate));
  return {t.mul(o, t.tanh(c)), c};
}

/// Runs a standard LSTM over a scalar history and returns the last hidden
/// state; an empty history returns the zero state.
inline Var trend_encode(Tape& t, const Params& P, const std::string& prefix,
                        const std::vector<double>& history, int hidden) {
  LstmState s = zero_state(t, hidden);
  for (double y : history)
    s = plstm_step(t, P, prefix, t.constant(Array::vec({y})), s, std::nullopt);
  return s.h;
}

struct AttentionVars {
  Var alpha;   // one weight per day, softmax-normalized
  Var pooled;  // weighted sum of the day states
};

/// Scores each day's concatenated hidden state (optionally conditioned on
/// the profile embedding), normalizes with softmax, and pools.
inline AttentionVars soft_attention(Tape& t, const Params& P,
                                    const std::vector<Var>& day_states,
                                    std::optional<Var> profile) {
  if (day_states.empty())
    throw std::invalid_argument("soft_attention: need at least one day");
  std::vector<Var> scores;
  scores.reserve(day_states.size());
  for (Var hx : day_states) {
    Var z = t.add(t.matmul(param(P, "attn/W_h"), hx), param(P, "attn/b"));
    if (profile) z = t.add(z, t.matmul(param(P, "attn/W_D"), *profile));
    scores.push_back(t.dot(param(P, "attn/w_score"), t.tanh(z)));
  }
  Var alpha = t.softmax(t.concat(scores));
  Var stacked = t.concat(day_states, static_cast<int>(day_states.size()));
  return {alpha, t.matmul(stacked, alpha, /*transpose=*/true)};
}

/// R-hat assembly: every task gets the shared representation and its own
/// trend state; tasks with course features append them.
inline std::vector<Var> build_task_inputs(Tape& t, Var shared,
                                          const std::vector<Var>& trends,
                                          const std::vector<std::optional<Var>>& extras) {
  if (trends.size() != extras.size())
    throw std::invalid_argument("build_task_inputs: trend/extra count mismatch");
  std::vector<Var> out;
  out.reserve(trends.size());
  for (std::size_t n = 0; n < trends.size(); ++n) {
    std::vector<Var> parts{shared, trends[n]};
    if (extras[n]) parts.push_back(*extras[n]);
    out.push_back(t.concat(parts));
  }
  return out;
}

struct UnitVars {
  std::vector<Var> outputs;  // next-layer representation per task
  std::vector<Var> betas;    // pair order (1,2), (1,3), (2,3)
};

/// One interaction unit: task-specific FC + PReLU to a common width, one
/// sigmoid-of-dot coupling weight per unordered pair (shared by both
/// directions), then cross-task weighted sums. Severed tasks contribute a
/// zero vector and receive no update.
inline UnitVars interaction_unit(Tape& t, const Params& P, int layer, int fc_dim,
                                 const std::vector<Var>& inputs,
                                 const std::vector<bool>& active) {
  const int n_tasks = static_cast<int>(inputs.size());
  if (static_cast<int>(active.size()) != n_tasks)
    throw std::invalid_argument("interaction_unit: active mask size mismatch");
  Var severed = t.constant(Array::zeros({fc_dim}));
  std::vector<Var> fc;
  fc.reserve(inputs.size());
  for (int n = 0; n < n_tasks; ++n) {
    if (!active[static_cast<std::size_t>(n)]) {
      fc.push_back(severed);
      continue;
    }
    const std::string base =
        "unit" + std::to_string(layer) + "/task" + detail::task_name(n);
    Var z = t.add(t.matmul(param(P, base + "/W"), inputs[static_cast<std::size_t>(n)]),
                  param(P, base + "/b"));
    fc.push_back(t.prelu(z, param(P, base + "/prelu")));
  }

  // one coupling weight per unordered pair, reused in every update
  std::map<std::pair<int, int>, Var> beta;
  UnitVars out;
  for (int i = 0; i < n_tasks; ++i)
    for (int j = i + 1; j < n_tasks; ++j) {
      Var b = t.sigmoid(t.dot(fc[static_cast<std::size_t>(i)],
                              fc[static_cast<std::size_t>(j)]));
      beta.emplace(std::make_pair(i, j), b);
      out.betas.push_back(b);
    }

  for (int n = 0; n < n_tasks; ++n) {
    if (!active[static_cast<std::size_t>(n)]) {
      out.outputs.push_back(severed);
      continue;
    }
    Var acc = fc[static_cast<std::size_t>(n)];
    for (int m = 0; m < n_tasks; ++m) {
      if (m == n || !active[static_cast<std::size_t>(m)]) continue;
      const std::pair<int, int> key = std::minmax(n, m);
      Var b = beta.at(key);
      Var bvec = t.concat(std::vector<Var>(static_cast<std::size_t>(fc_dim), b));
      acc = t.add(acc, t.mul(bvec, fc[static_cast<std::size_t>(m)]));
    }
    out.outputs.push_back(acc);
  }
  return out;
}

struct ForwardVars {
  std::vector<Var> preds;                    // one scalar per task
  Var alpha{};                               // unset for history_only_lstm
  Var pooled{};                              // attention-pooled day state
  Var student_repr{};                        // profile embedding + pooled
  std::vector<std::vector<Var>> unit_betas;  // per unit, pair order (1,2),(1,3),(2,3)
};

/// Per-student attention weights in plain numbers, for export and tests.
struct AttentionTrace {
  std::vector<double> alpha;
  std::vector<std::vector<double>> betas;  // per unit
};

inline AttentionTrace extract_trace(const Tape& t, const ForwardVars& f) {
  AttentionTrace tr;
  if (f.alpha.id >= 0) tr.alpha = t.value(f.alpha).data;
  for (const auto& unit : f.unit_betas) {
    std::vector<double> row;
    row.reserve(unit.size());
    for (Var b : unit) row.push_back(t.value(b).data[0]);
    tr.betas.push_back(std::move(row));
  }
  return tr;
}

namespace detail {

inline void check_sample(const ModelSpec& spec, const TaskSample& s) {
  const DataDims& d = spec.dims;
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument("sample " + s.id + ": " + what);
  };
  if (static_cast<int>(s.profile.size()) != d.profile_dim)
    fail("profile width mismatch");
  if (static_cast<int>(s.histories.size()) != d.task_count)
    fail("history count mismatch");
  if (static_cast<int>(s.task_features.size()) != d.task_count)
    fail("task feature count mismatch");
  for (int n = 0; n < d.task_count; ++n)
    if (static_cast<int>(s.task_features[static_cast<std::size_t>(n)].size()) !=
        d.v_dims[static_cast<std::size_t>(n)])
      fail("task feature width mismatch for task " + task_name(n));
  if (spec.variant == Variant::history_only_lstm) return;
  if (static_cast<int>(s.library.size()) != d.x_days ||
      static_cast<int>(s.dormitory.size()) != d.x_days)
    fail("behavior sequence length mismatch");
  for (int x = 0; x < d.x_days; ++x) {
    if (static_cast<int>(s.library[static_cast<std::size_t>(x)].size()) !=
        d.behavior_dims[0])
      fail("library row width mismatch");
    if (static_cast<int>(s.dormitory[static_cast<std::size_t>(x)].size()) !=
        d.behavior_dims[1])
      fail("dormitory row width mismatch");
  }
}

inline Var head_output(Tape& t, const Params& P, const std::string& head, Var x,
                       double dropout_rate, Mode mode, std::mt19937_64& rng) {
  Var dropped = t.dropout(x, dropout_rate, mode, rng);
  return t.tanh(t.add(t.dot(param(P, head + "/w"), dropped), param(P, head + "/b")));
}

}  // namespace detail

/// Full forward pass for one student under the given variant. Train mode
/// draws dropout masks from `rng`; eval mode is deterministic.
inline ForwardVars forward(Tape& t, const Params& P, const ModelSpec& spec,
                           const TaskSample& s, Mode mode, std::mt19937_64& rng) {
  detail::check_sample(spec, s);
  const ModelConfig& c = spec.config;
  const int n_tasks = c.task_count;
  ForwardVars out;

  std::vector<bool> active(static_cast<std::size_t>(n_tasks), true);
  if (spec.variant == Variant::single_task)
    for (int n = 0; n < n_tasks; ++n)
      active[static_cast<std::size_t>(n)] = (n == spec.task_index);

  if (spec.variant == Variant::history_only_lstm) {
    for (int n = 0; n < n_tasks; ++n) {
      Var h = trend_encode(t, P, "trend" + detail::task_name(n),
                           s.histories[static_cast<std::size_t>(n)], c.trend_hidden);
      out.preds.push_back(detail::head_output(t, P, "ho_head" + detail::task_name(n), h,
                                              c.dropout_rate, mode, rng));
    }
    return out;
  }

  Var dbar = embed_profile(t, P, t.constant(Array::vec(s.profile)));
  const bool profile_paths = spec.variant != Variant::standard_lstm_gates;
  std::optional<Var> gate_profile =
      profile_paths ? std::optional<Var>(dbar) : std::nullopt;

  LstmState lib = zero_state(t, c.behavior_hidden[0]);
  LstmState dorm = zero_state(t, c.behavior_hidden[1]);
  std::vector<Var> day_states;
  day_states.reserve(static_cast<std::size_t>(c.x_days));
  for (int x = 0; x < c.x_days; ++x) {
    lib = plstm_step(t, P, "plstm_lib",
                     t.constant(Array::vec(s.library[static_cast<std::size_t>(x)])), lib,
                     gate_profile);
    dorm = plstm_step(t, P, "plstm_dorm",
                      t.constant(Array::vec(s.dormitory[static_cast<std::size_t>(x)])),
                      dorm, gate_profile);
    day_states.push_back(t.concat({lib.h, dorm.h}));
  }

  if (spec.variant == Variant::no_soft_attention) {
    const double w = 1.0 / static_cast<double>(c.x_days);
    out.alpha = t.constant(
        Array({c.x_days}, std::vector<double>(static_cast<std::size_t>(c.x_days), w)));
    Var stacked = t.concat(day_states, c.x_days);
    out.pooled = t.matmul(stacked, out.alpha, /*transpose=*/true);
  } else {
    AttentionVars att = soft_attention(t, P, day_states, gate_profile);
    out.alpha = att.alpha;
    out.pooled = att.pooled;
  }
  out.student_repr = t.concat({dbar, out.pooled});

  std::vector<Var> trends;
  std::vector<std::optional<Var>> extras;
  for (int n = 0; n < n_tasks; ++n) {
    if (!active[static_cast<std::size_t>(n)]) {
      // placeholder, never read: the unit stack treats this branch as zero
      trends.push_back(t.constant(Array::zeros({c.trend_hidden})));
      extras.emplace_back();
      continue;
    }
    trends.push_back(trend_encode(t, P, "trend" + detail::task_name(n),
                                  s.histories[static_cast<std::size_t>(n)],
                                  c.trend_hidden));
    if (spec.dims.v_dims[static_cast<std::size_t>(n)] > 0)
      extras.emplace_back(
          t.constant(Array::vec(s.task_features[static_cast<std::size_t>(n)])));
    else
      extras.emplace_back();
  }
  std::vector<Var> reps = build_task_inputs(t, out.student_repr, trends, extras);

  for (int l = 1; l <= c.num_units; ++l) {
    UnitVars unit = interaction_unit(t, P, l, c.unit_fc_dim, reps, active);
    reps = std::move(unit.outputs);
    out.unit_betas.push_back(std::move(unit.betas));
  }

  for (int n = 0; n < n_tasks; ++n) {
    if (!active[static_cast<std::size_t>(n)]) {
      out.preds.push_back(t.constant(Array::scalar(0.0)));
      continue;
    }
    out.preds.push_back(detail::head_output(t, P, "head" + detail::task_name(n),
                                            reps[static_cast<std::size_t>(n)],
                                            c.dropout_rate, mode, rng));
  }
  return out;
}

/// A trained model bundle: spec, parameters, and the scaler state needed to
/// map raw inputs in and predictions back out.
struct Checkpoint {
  ModelSpec spec;
  std::map<std::string, std::vector<std::string>> profile_vocab;
  Scaler library_scaler;
  std::vector<Scaler> history_scalers;
  std::vector<Scaler> label_scalers;
  std::vector<std::optional<Scaler>> task_feature_scalers;
  ParameterStore params;

  nlohmann::json to_json_value() const {
    nlohmann::json tf = nlohmann::json::array();
    for (const auto& s : task_feature_scalers)
      tf.push_back(s ? nlohmann::json(*s) : nlohmann::json(nullptr));
    return nlohmann::json{{"format", "dapamt-checkpoint"},
                          {"spec", spec},
                          {"profile_vocab", profile_vocab},
                          {"scalers",
                           {{"library", library_scaler},
                            {"histories", history_scalers},
                            {"labels", label_scalers},
                            {"task_features", std::move(tf)}}},
                          {"params", params.to_json_value()}};
  }

  static Checkpoint from_json_value(const nlohmann::json& j) {
    if (j.value("format", "") != "dapamt-checkpoint")
      throw std::runtime_error("not a dapamt checkpoint file");
    Checkpoint ck;
    j.at("spec").get_to(ck.spec);
    if (j.contains("profile_vocab")) j.at("profile_vocab").get_to(ck.profile_vocab);
    const nlohmann::json& sc = j.at("scalers");
    sc.at("library").get_to(ck.library_scaler);
    sc.at("histories").get_to(ck.history_scalers);
    sc.at("labels").get_to(ck.label_scalers);
    for (const nlohmann::json& t : sc.at("task_features"))
      ck.task_feature_scalers.push_back(
          t.is_null() ? std::optional<Scaler>{} : std::optional<Scaler>(t.get<Scaler>()));
    ck.params = ParameterStore::from_json_value(j.at("params"));

    // reject anything whose parameter layout disagrees with the spec
    ParameterStore expected = make_parameters(ck.spec, 0);
    if (expected.size() != ck.params.size())
      throw std::runtime_error("checkpoint: parameter set mismatch");
    for (const auto& [name, arr] : expected.values()) {
      if (!ck.params.has(name))
        throw std::runtime_error("checkpoint: missing parameter " + name);
      if (ck.params.get(name).shape != arr.shape)
        throw std::runtime_error("checkpoint: shape mismatch for " + name);
    }
    return ck;
  }

  void save(const std::string& path) const {
    atomic_write_file(path, to_json_value().dump());
  }

  static Checkpoint load(const std::string& path) {
    return from_json_value(nlohmann::json::parse(read_file(path)));
  }
};

}  // namespace dapamt
