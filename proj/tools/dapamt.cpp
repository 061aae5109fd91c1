// dapamt command line: build datasets (synthetic or from raw CSV records),
// train the multi-task model and its ablations, and inspect trained models.
// Every output file is written atomically and gets a sibling manifest that
// records the resolved configuration and inputs of the run that made it.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dapamt/dataset.hpp"
#include "dapamt/gradcheck.hpp"
#include "dapamt/ingest.hpp"
#include "dapamt/manifest.hpp"
#include "dapamt/model.hpp"
#include "dapamt/synthdata.hpp"
#include "dapamt/training.hpp"

namespace {

using nlohmann::json;

json load_json_file(const std::string& path) { return json::parse(dapamt::read_file(path)); }

// {"model": {...}, "train": {...}, "variant": "...", "task_index": n},
// every part optional
struct TrainFileConfig {
  dapamt::ModelConfig model;
  dapamt::TrainConfig train;
  std::string variant = "full";
  int task_index = -1;
};

TrainFileConfig parse_train_config(const json& j) {
  TrainFileConfig c;
  if (j.contains("model")) j.at("model").get_to(c.model);
  if (j.contains("train")) j.at("train").get_to(c.train);
  c.variant = j.value("variant", c.variant);
  c.task_index = j.value("task_index", c.task_index);
  return c;
}

json resolved_train_config(const TrainFileConfig& c) {
  return json{{"model", c.model},
              {"train", c.train},
              {"variant", c.variant},
              {"task_index", c.task_index}};
}

std::vector<int> selected_indices(const dapamt::Dataset& ds, const std::string& split) {
  if (split.empty()) {
    std::vector<int> all(ds.students.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    return all;
  }
  std::vector<int> idx = ds.split_indices(split);
  if (idx.empty()) throw std::runtime_error("no samples in split '" + split + "'");
  return idx;
}

struct GenSynthArgs {
  std::string config_path, out;
  std::uint64_t seed = 0;
  int students = 0;
  bool seed_set = false, students_set = false;
};

int run_gen_synth(const GenSynthArgs& a) {
  dapamt::RunManifest mf;
  mf.command = "gen-synth";
  mf.started_at = dapamt::iso8601_utc_now();

  dapamt::SynthConfig cfg;
  if (!a.config_path.empty()) cfg = load_json_file(a.config_path).get<dapamt::SynthConfig>();
  if (a.seed_set) cfg.seed = a.seed;
  if (a.students_set) cfg.num_students = a.students;
  cfg.validate();

  dapamt::Dataset ds = dapamt::generate(cfg);
  ds.save(a.out);

  mf.config_path = a.config_path;
  mf.config = cfg;
  mf.seed = cfg.seed;
  if (!a.config_path.empty()) mf.inputs.push_back(a.config_path);
  mf.outputs.push_back(a.out);
  mf.finished_at = dapamt::iso8601_utc_now();
  mf.save_alongside(a.out);

  std::cout << "gen-synth: wrote " << ds.students.size() << " students ("
            << ds.split_indices("train").size() << " train / "
            << ds.split_indices("val").size() << " val / "
            << ds.split_indices("test").size() << " test) to " << a.out << '\n';
  return 0;
}

struct IngestArgs {
  std::string footprints, profiles, grades, borrows, config_path, out;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

int run_ingest(const IngestArgs& a) {
  dapamt::RunManifest mf;
  mf.command = "ingest";
  mf.started_at = dapamt::iso8601_utc_now();

  dapamt::IngestConfig cfg;
  if (!a.config_path.empty()) cfg = load_json_file(a.config_path).get<dapamt::IngestConfig>();
  if (a.seed_set) cfg.seed = a.seed;
  cfg.validate();

  dapamt::IngestInput in;
  in.footprints = dapamt::parse_footprints(dapamt::read_file(a.footprints), a.footprints);
  in.profiles = dapamt::parse_profiles(dapamt::read_file(a.profiles), a.profiles);
  in.grades = dapamt::parse_grades(dapamt::read_file(a.grades), a.grades);
  in.borrows = dapamt::parse_borrows(dapamt::read_file(a.borrows), a.borrows);

  dapamt::IngestReport rep;
  dapamt::Dataset ds = dapamt::build_dataset(in, cfg, &rep);
  for (const std::string& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  ds.save(a.out);

  mf.config_path = a.config_path;
  mf.config = cfg;
  mf.seed = cfg.seed;
  mf.inputs = {a.footprints, a.profiles, a.grades, a.borrows};
  if (!a.config_path.empty()) mf.inputs.push_back(a.config_path);
  mf.outputs.push_back(a.out);
  mf.finished_at = dapamt::iso8601_utc_now();
  mf.save_alongside(a.out);

  std::cout << "ingest: wrote " << rep.students << " students to " << a.out << '\n';
  return 0;
}

struct TrainArgs {
  std::string dataset, config_path, out;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

int run_train(const TrainArgs& a) {
  dapamt::RunManifest mf;
  mf.command = "train";
  mf.started_at = dapamt::iso8601_utc_now();

  TrainFileConfig cfg;
  if (!a.config_path.empty()) cfg = parse_train_config(load_json_file(a.config_path));
  if (a.seed_set) cfg.train.seed = a.seed;

  const dapamt::Dataset ds = dapamt::Dataset::load(a.dataset);
  // the dataset is authoritative for input geometry
  cfg.model.x_days = ds.dims.x_days;
  cfg.model.task_count = ds.dims.task_count;

  dapamt::ModelSpec spec{cfg.model, ds.dims, dapamt::variant_from(cfg.variant),
                         cfg.task_index};
  spec.validate();

  const dapamt::TrainResult result = dapamt::train(ds, spec, cfg.train);
  const dapamt::Checkpoint ck{spec,
                              ds.profile_vocab,
                              ds.library_scaler,
                              ds.history_scalers,
                              ds.label_scalers,
                              ds.task_feature_scalers,
                              result.params};
  ck.save(a.out);
  const std::string loss_path = a.out + ".loss.csv";
  dapamt::atomic_write_file(loss_path, dapamt::loss_log_csv(result.log));

  mf.config_path = a.config_path;
  mf.config = resolved_train_config(cfg);
  mf.seed = cfg.train.seed;
  mf.inputs.push_back(a.dataset);
  if (!a.config_path.empty()) mf.inputs.push_back(a.config_path);
  mf.outputs = {a.out, loss_path};
  mf.finished_at = dapamt::iso8601_utc_now();
  mf.save_alongside(a.out);

  std::cout << "train: " << cfg.variant << ", " << cfg.train.epochs
            << " epochs, final total loss " << result.log.back().total << '\n';
  if (result.best_epoch > 0)
    std::cout << "train: kept epoch " << result.best_epoch
              << " (validation loss " << result.best_val << ")\n";
  std::cout << "train: wrote " << a.out << '\n';
  return 0;
}

struct EvaluateArgs {
  std::string checkpoint, dataset, split = "test", out;
};

int run_evaluate(const EvaluateArgs& a) {
  dapamt::RunManifest mf;
  mf.command = "evaluate";
  mf.started_at = dapamt::iso8601_utc_now();

  const dapamt::Checkpoint ck = dapamt::Checkpoint::load(a.checkpoint);
  const dapamt::Dataset ds = dapamt::Dataset::load(a.dataset);
  const dapamt::EvalResult ev =
      dapamt::evaluate(ck.spec, ck.params, ck.label_scalers, ds, a.split);

  json metrics{{"split", a.split}, {"count", ev.ids.size()}};
  metrics["mse"] = ev.mse;
  std::vector<double> rmse;
  for (double m : ev.mse) rmse.push_back(std::sqrt(m));
  metrics["rmse"] = rmse;

  for (std::size_t n = 0; n < ev.mse.size(); ++n)
    std::cout << "evaluate: task" << n + 1 << " mse " << ev.mse[n] << " rmse "
              << rmse[n] << '\n';

  if (!a.out.empty()) {
    dapamt::atomic_write_file(a.out, metrics.dump(2) + "\n");
    mf.config = json{{"split", a.split}};
    mf.inputs = {a.checkpoint, a.dataset};
    mf.outputs = {a.out};
    mf.finished_at = dapamt::iso8601_utc_now();
    mf.save_alongside(a.out);
    std::cout << "evaluate: wrote " << a.out << '\n';
  }
  return 0;
}

struct PredictArgs {
  std::string checkpoint, dataset, split, out;
};

int run_predict(const PredictArgs& a) {
  dapamt::RunManifest mf;
  mf.command = "predict";
  mf.started_at = dapamt::iso8601_utc_now();

  const dapamt::Checkpoint ck = dapamt::Checkpoint::load(a.checkpoint);
  const dapamt::Dataset ds = dapamt::Dataset::load(a.dataset);
  const std::vector<int> idx = selected_indices(ds, a.split);

  std::ostringstream csv;
  csv << std::setprecision(17);
  csv << "student_id,pred_wag,pred_books,pred_fails\n";
  std::mt19937_64 unused_rng(0);
  for (int i : idx) {
    const dapamt::TaskSample& s = ds.students[static_cast<std::size_t>(i)];
    dapamt::Tape t;
    dapamt::Params P = dapamt::bind(t, ck.params);
    const dapamt::ForwardVars f =
        dapamt::forward(t, P, ck.spec, s, dapamt::Mode::eval, unused_rng);
    csv << s.id;
    for (std::size_t n = 0; n < f.preds.size(); ++n)
      csv << ',' << ck.label_scalers[n].invert(t.value(f.preds[n]).data[0]);
    csv << '\n';
  }
  dapamt::atomic_write_file(a.out, csv.str());

  mf.config = json{{"split", a.split}};
  mf.inputs = {a.checkpoint, a.dataset};
  mf.outputs = {a.out};
  mf.finished_at = dapamt::iso8601_utc_now();
  mf.save_alongside(a.out);

  std::cout << "predict: wrote " << idx.size() << " rows to " << a.out << '\n';
  return 0;
}

struct ExportAttentionArgs {
  std::string checkpoint, dataset, split, out;
};

int run_export_attention(const ExportAttentionArgs& a) {
  dapamt::RunManifest mf;
  mf.command = "export-attention";
  mf.started_at = dapamt::iso8601_utc_now();

  const dapamt::Checkpoint ck = dapamt::Checkpoint::load(a.checkpoint);
  if (ck.spec.variant == dapamt::Variant::history_only_lstm)
    throw std::runtime_error("export-attention: variant has no attention trace");
  const dapamt::Dataset ds = dapamt::Dataset::load(a.dataset);
  const std::vector<int> idx = selected_indices(ds, a.split);

  std::ostringstream csv;
  csv << std::setprecision(17);
  csv << "student_id";
  for (int x = 1; x <= ck.spec.dims.x_days; ++x) csv << ",alpha_" << x;
  for (int l = 1; l <= ck.spec.config.num_units; ++l)
    for (int i = 1; i <= ck.spec.config.task_count; ++i)
      for (int j = i + 1; j <= ck.spec.config.task_count; ++j)
        csv << ",unit" << l << "_beta_" << i << j;
  csv << '\n';

  std::mt19937_64 unused_rng(0);
  for (int i : idx) {
    const dapamt::TaskSample& s = ds.students[static_cast<std::size_t>(i)];
    dapamt::Tape t;
    dapamt::Params P = dapamt::bind(t, ck.params);
    const dapamt::ForwardVars f =
        dapamt::forward(t, P, ck.spec, s, dapamt::Mode::eval, unused_rng);
    const dapamt::AttentionTrace tr = dapamt::extract_trace(t, f);
    csv << s.id;
    for (double v : tr.alpha) csv << ',' << v;
    for (const auto& unit : tr.betas)
      for (double v : unit) csv << ',' << v;
    csv << '\n';
  }
  dapamt::atomic_write_file(a.out, csv.str());

  mf.config = json{{"split", a.split}};
  mf.inputs = {a.checkpoint, a.dataset};
  mf.outputs = {a.out};
  mf.finished_at = dapamt::iso8601_utc_now();
  mf.save_alongside(a.out);

  std::cout << "export-attention: wrote " << idx.size() << " rows to " << a.out << '\n';
  return 0;
}

struct GradcheckArgs {
  std::string dataset, config_path, out;
  std::uint64_t seed = 1;
  double tolerance = 1e-4;
};

// small hidden sizes keep the finite-difference sweep fast; gradients flow
// through the same code paths at any width
dapamt::ModelConfig tiny_model_config() {
  dapamt::ModelConfig mc;
  mc.embed_dim = 3;
  mc.behavior_hidden = {3, 3};
  mc.trend_hidden = 3;
  mc.unit_fc_dim = 3;
  mc.num_units = 2;
  mc.dropout_rate = 0.0;
  mc.attn_dim = 3;
  return mc;
}

int run_gradcheck(const GradcheckArgs& a) {
  TrainFileConfig cfg;
  cfg.model = tiny_model_config();
  if (!a.config_path.empty()) {
    const json j = load_json_file(a.config_path);
    TrainFileConfig parsed = parse_train_config(j);
    cfg = parsed;
    if (!j.contains("model")) cfg.model = tiny_model_config();
  }

  dapamt::Dataset ds;
  if (a.dataset.empty()) {
    dapamt::SynthConfig sc;
    sc.num_students = 6;
    sc.x_days = 4;
    sc.t_max = 2;
    sc.informative_days = 2;
    sc.train_frac = 0.7;
    sc.val_frac = 0.0;
    sc.seed = a.seed;
    ds = dapamt::generate(sc);
  } else {
    ds = dapamt::Dataset::load(a.dataset);
  }

  cfg.model.x_days = ds.dims.x_days;
  cfg.model.task_count = ds.dims.task_count;
  dapamt::ModelSpec spec{cfg.model, ds.dims, dapamt::variant_from(cfg.variant),
                         cfg.task_index};
  spec.validate();

  std::vector<dapamt::TaskSample> batch;
  for (int i : ds.split_indices("train")) {
    batch.push_back(ds.students[static_cast<std::size_t>(i)]);
    if (batch.size() == 4) break;
  }
  if (batch.empty()) throw std::runtime_error("gradcheck: no training samples");

  const dapamt::GradcheckReport rep =
      dapamt::gradcheck(spec, batch, cfg.train.lambdas, a.seed);
  const bool ok = rep.max_rel_err < a.tolerance;
  std::cout << "gradcheck: max rel err " << rep.max_rel_err << " (" << rep.worst_param
            << "[" << rep.worst_index << "]) over " << rep.entries_checked
            << " entries\n";
  std::cout << "gradcheck: " << (ok ? "PASS" : "FAIL") << " (tolerance " << a.tolerance
            << ")\n";

  if (!a.out.empty()) {
    dapamt::RunManifest mf;
    mf.command = "gradcheck";
    mf.started_at = dapamt::iso8601_utc_now();
    const json report{{"max_rel_err", rep.max_rel_err},
                      {"worst_param", rep.worst_param},
                      {"worst_index", rep.worst_index},
                      {"entries_checked", rep.entries_checked},
                      {"tolerance", a.tolerance},
                      {"pass", ok}};
    dapamt::atomic_write_file(a.out, report.dump(2) + "\n");
    mf.config_path = a.config_path;
    mf.config = resolved_train_config(cfg);
    mf.seed = a.seed;
    if (!a.dataset.empty()) mf.inputs.push_back(a.dataset);
    if (!a.config_path.empty()) mf.inputs.push_back(a.config_path);
    mf.outputs = {a.out};
    mf.finished_at = dapamt::iso8601_utc_now();
    mf.save_alongside(a.out);
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-task student performance models over campus behavior records"};
  app.require_subcommand(1);
  int rc = 0;

  GenSynthArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-synth", "generate a synthetic dataset");
  gen_cmd->add_option("--config", gen.config_path, "synthesis config JSON");
  CLI::Option* gen_seed = gen_cmd->add_option("--seed", gen.seed, "override config seed");
  CLI::Option* gen_students =
      gen_cmd->add_option("--students", gen.students, "override student count");
  gen_cmd->add_option("--out", gen.out, "dataset output path")->required();
  gen_cmd->callback([&] {
    gen.seed_set = gen_seed->count() > 0;
    gen.students_set = gen_students->count() > 0;
    rc = run_gen_synth(gen);
  });

  IngestArgs ing;
  CLI::App* ing_cmd = app.add_subcommand("ingest", "build a dataset from raw CSV records");
  ing_cmd->add_option("--footprints", ing.footprints, "footprints CSV")->required();
  ing_cmd->add_option("--profiles", ing.profiles, "profiles CSV")->required();
  ing_cmd->add_option("--grades", ing.grades, "grades CSV")->required();
  ing_cmd->add_option("--borrows", ing.borrows, "borrows CSV")->required();
  ing_cmd->add_option("--config", ing.config_path, "ingest config JSON");
  CLI::Option* ing_seed = ing_cmd->add_option("--seed", ing.seed, "override config seed");
  ing_cmd->add_option("--out", ing.out, "dataset output path")->required();
  ing_cmd->callback([&] {
    ing.seed_set = ing_seed->count() > 0;
    rc = run_ingest(ing);
  });

  TrainArgs tr;
  CLI::App* tr_cmd = app.add_subcommand("train", "train a model on a dataset");
  tr_cmd->add_option("--dataset", tr.dataset, "dataset path")->required();
  tr_cmd->add_option("--config", tr.config_path, "train config JSON");
  CLI::Option* tr_seed = tr_cmd->add_option("--seed", tr.seed, "override train seed");
  tr_cmd->add_option("--out", tr.out, "checkpoint output path")->required();
  tr_cmd->callback([&] {
    tr.seed_set = tr_seed->count() > 0;
    rc = run_train(tr);
  });

  EvaluateArgs ev;
  CLI::App* ev_cmd = app.add_subcommand("evaluate", "report MSE of a checkpoint");
  ev_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint path")->required();
  ev_cmd->add_option("--dataset", ev.dataset, "dataset path")->required();
  ev_cmd->add_option("--split", ev.split, "split to score (default test)");
  ev_cmd->add_option("--out", ev.out, "metrics JSON output path");
  ev_cmd->callback([&] { rc = run_evaluate(ev); });

  PredictArgs pr;
  CLI::App* pr_cmd = app.add_subcommand("predict", "write per-student predictions");
  pr_cmd->add_option("--checkpoint", pr.checkpoint, "checkpoint path")->required();
  pr_cmd->add_option("--dataset", pr.dataset, "dataset path")->required();
  pr_cmd->add_option("--split", pr.split, "split to predict (default all)");
  pr_cmd->add_option("--out", pr.out, "predictions CSV output path")->required();
  pr_cmd->callback([&] { rc = run_predict(pr); });

  ExportAttentionArgs ex;
  CLI::App* ex_cmd =
      app.add_subcommand("export-attention", "write attention weights per student");
  ex_cmd->add_option("--checkpoint", ex.checkpoint, "checkpoint path")->required();
  ex_cmd->add_option("--dataset", ex.dataset, "dataset path")->required();
  ex_cmd->add_option("--split", ex.split, "split to export (default all)");
  ex_cmd->add_option("--out", ex.out, "attention CSV output path")->required();
  ex_cmd->callback([&] { rc = run_export_attention(ex); });

  GradcheckArgs gc;
  CLI::App* gc_cmd =
      app.add_subcommand("gradcheck", "compare gradients against finite differences");
  gc_cmd->add_option("--dataset", gc.dataset, "dataset path (default: built-in tiny set)");
  gc_cmd->add_option("--config", gc.config_path, "train config JSON");
  gc_cmd->add_option("--seed", gc.seed, "parameter init seed");
  gc_cmd->add_option("--tolerance", gc.tolerance, "max relative error allowed");
  gc_cmd->add_option("--out", gc.out, "report JSON output path");
  gc_cmd->callback([&] { rc = run_gradcheck(gc); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return rc;
}
