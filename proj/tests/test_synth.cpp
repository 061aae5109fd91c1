#include <cmath>
#include <numeric>

#include <catch2/catch_amalgamated.hpp>

#include "dapamt/synthdata.hpp"

using namespace dapamt;
using Catch::Approx;

namespace {

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

ModelSpec small_spec(const Dataset& ds, int x_days) {
  ModelSpec spec;
  spec.config.embed_dim = 4;
  spec.config.behavior_hidden = {5, 3};
  spec.config.trend_hidden = 3;
  spec.config.unit_fc_dim = 8;
  spec.config.num_units = 2;
  spec.config.dropout_rate = 0.1;
  spec.config.x_days = x_days;
  spec.config.attn_dim = 4;
  spec.dims = ds.dims;
  return spec;
}

}  // namespace

TEST_CASE("synth config validation") {
  SynthConfig c;
  CHECK_NOTHROW(c.validate());
  c.num_students = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SynthConfig{};
  c.informative_days = c.x_days + 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SynthConfig{};
  c.t_min = 2;
  c.t_max = 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SynthConfig{};
  c.train_frac = 0.9;
  c.val_frac = 0.1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SynthConfig{};
  c.task_noise = {1.0};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SynthConfig{};
  c.books_sign = 2;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  nlohmann::json j{{"num_students", 50}, {"seed", 9}};
  SynthConfig parsed = j.get<SynthConfig>();
  CHECK(parsed.num_students == 50);
  CHECK(parsed.seed == 9);
  CHECK(parsed.x_days == SynthConfig{}.x_days);
  SynthConfig round = nlohmann::json(parsed).get<SynthConfig>();
  CHECK(round.num_students == 50);
  const nlohmann::json invalid{{"num_students", -3}};
  CHECK_THROWS_AS(invalid.get<SynthConfig>(), std::invalid_argument);
}

TEST_CASE("generated datasets have the declared shape") {
  SynthConfig cfg;
  cfg.num_students = 120;
  cfg.x_days = 9;
  cfg.seed = 5;
  Dataset ds = generate(cfg);

  CHECK(ds.dims.x_days == 9);
  CHECK(ds.dims.profile_dim == 8);
  CHECK(ds.dims.v_dims == std::vector<int>{7, 0, 8});
  CHECK(ds.students.size() == 120);
  CHECK(ds.split_indices("train").size() == 72);
  CHECK(ds.split_indices("val").size() == 12);
  CHECK(ds.split_indices("test").size() == 36);
  REQUIRE(ds.profile_vocab.count("department") == 1);
  CHECK(ds.profile_vocab.at("department").size() == 6);

  for (const TaskSample& s : ds.students) {
    REQUIRE(s.has_labels);
    REQUIRE(s.profile.size() == 8);
    // one-hot per profile field
    CHECK(std::accumulate(s.profile.begin(), s.profile.begin() + 2, 0.0) == 1.0);
    CHECK(std::accumulate(s.profile.begin() + 2, s.profile.end(), 0.0) == 1.0);
    REQUIRE(s.library.size() == 9);
    REQUIRE(s.dormitory.size() == 9);
    for (const auto& row : s.library) {
      REQUIRE(row.size() == 16);
      for (double v : row) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
    for (const auto& row : s.dormitory) {
      REQUIRE(row.size() == 6);
      CHECK(std::accumulate(row.begin(), row.end(), 0.0) == 1.0);
    }
    for (int n = 0; n < 3; ++n) {
      const auto un = static_cast<std::size_t>(n);
      REQUIRE(s.histories[un].size() >= 1);
      REQUIRE(s.histories[un].size() <= 3);
      for (double v : s.histories[un]) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
    CHECK(s.task_features[0].size() == 7);
    CHECK(s.task_features[1].empty());
    CHECK(s.task_features[2].size() == 8);
  }
}

TEST_CASE("labels de-scale to valid ranges") {
  SynthConfig cfg;
  cfg.num_students = 300;
  cfg.x_days = 6;
  cfg.seed = 11;
  Dataset ds = generate(cfg);

  for (const TaskSample& s : ds.students) {
    const double wag = ds.label_scalers[0].invert(s.labels[0]);
    const double books = ds.label_scalers[1].invert(s.labels[1]);
    const double fails = ds.label_scalers[2].invert(s.labels[2]);
    CHECK(wag >= 0.0);
    CHECK(wag <= 100.0);
    CHECK(books >= 0.0);
    CHECK(books == Approx(std::round(books)).margin(1e-9));
    CHECK(fails >= 0.0);
    CHECK(fails == Approx(std::round(fails)).margin(1e-9));
  }
}

TEST_CASE("generation is deterministic in the seed") {
  SynthConfig cfg;
  cfg.num_students = 60;
  cfg.x_days = 5;
  cfg.seed = 17;
  const std::string a = generate(cfg).to_json_value().dump();
  const std::string b = generate(cfg).to_json_value().dump();
  CHECK(a == b);

  cfg.seed = 18;
  CHECK(a != generate(cfg).to_json_value().dump());
}

TEST_CASE("zero label noise realizes the correlation structure") {
  SynthConfig cfg;
  cfg.num_students = 1000;
  cfg.x_days = 5;           // behaviors are irrelevant to this check
  cfg.diligence_noise = 0.0;
  cfg.task_noise = {0.0, 0.0, 0.0};
  cfg.seed = 23;
  Dataset ds = generate(cfg);

  // label scaling is a positive affine map, so correlations pass through
  std::vector<double> wag, books, fails;
  for (const TaskSample& s : ds.students) {
    wag.push_back(s.labels[0]);
    books.push_back(s.labels[1]);
    fails.push_back(s.labels[2]);
  }
  CHECK(pearson(wag, books) > 0.9);
  CHECK(pearson(wag, fails) < -0.9);

  SynthConfig flipped = cfg;
  flipped.books_sign = -1;
  flipped.fails_sign = 1;
  Dataset fd = generate(flipped);
  std::vector<double> fwag, fbooks, ffails;
  for (const TaskSample& s : fd.students) {
    fwag.push_back(s.labels[0]);
    fbooks.push_back(s.labels[1]);
    ffails.push_back(s.labels[2]);
  }
  CHECK(pearson(fwag, fbooks) < -0.9);
  CHECK(pearson(fwag, ffails) > 0.9);
}

TEST_CASE("informative days control the behavior signal") {
  SynthConfig cfg;
  cfg.num_students = 400;
  cfg.x_days = 10;
  cfg.informative_days = 4;
  cfg.seed = 29;
  Dataset with_signal = generate(cfg);
  cfg.informative_days = 0;
  Dataset no_signal = generate(cfg);

  auto behavior_label_corr = [](const Dataset& ds) {
    std::vector<double> totals, wags;
    for (const TaskSample& s : ds.students) {
      double total = 0.0;
      for (const auto& row : s.library)
        total = std::accumulate(row.begin(), row.end(), total);
      totals.push_back(total);
      wags.push_back(s.labels[0]);
    }
    return pearson(totals, wags);
  };
  CHECK(behavior_label_corr(with_signal) > 0.3);
  CHECK(std::fabs(behavior_label_corr(no_signal)) < 0.1);
}

TEST_CASE("without informative days behaviors cannot beat the label mean") {
  SynthConfig cfg;
  cfg.num_students = 200;
  cfg.x_days = 6;
  cfg.informative_days = 0;
  cfg.seed = 31;
  Dataset ds = generate(cfg);

  // strip every non-behavior input so the model sees behaviors alone
  for (TaskSample& s : ds.students) {
    s.profile.assign(s.profile.size(), 0.0);
    for (auto& h : s.histories) h.clear();
    for (auto& v : s.task_features) v.assign(v.size(), 0.0);
  }

  ModelSpec spec = small_spec(ds, cfg.x_days);
  spec.config.dropout_rate = 0.0;
  TrainConfig tc;
  tc.epochs = 10;
  tc.batch_size = 32;
  tc.learning_rate = 0.005;
  tc.seed = 3;
  TrainResult trained = train(ds, spec, tc);
  EvalResult ev = evaluate(spec, trained.params, ds.label_scalers, ds, "test");

  // predict the train-split label mean for everyone
  std::vector<int> train_idx = ds.split_indices("train");
  double mean_wag = 0.0;
  for (int i : train_idx)
    mean_wag += ds.label_scalers[0].invert(
        ds.students[static_cast<std::size_t>(i)].labels[0]);
  mean_wag /= static_cast<double>(train_idx.size());
  double baseline_mse = 0.0;
  for (int i : ds.split_indices("test")) {
    const double truth = ds.label_scalers[0].invert(
        ds.students[static_cast<std::size_t>(i)].labels[0]);
    baseline_mse += (truth - mean_wag) * (truth - mean_wag);
  }
  baseline_mse /= static_cast<double>(ds.split_indices("test").size());

  CHECK(ev.mse[0] > 0.9 * baseline_mse);
}

TEST_CASE("history average baseline") {
  CHECK(baseline_ha({60, 70, 80}) == Approx(70.0));
  CHECK(baseline_ha({42}) == Approx(42.0));
  CHECK(baseline_ha({7, 7, 7, 7}) == Approx(7.0));
  CHECK_THROWS_AS(baseline_ha({}), std::invalid_argument);
}

TEST_CASE("ablation builder expands model jobs") {
  SynthConfig cfg;
  cfg.num_students = 30;
  cfg.x_days = 4;
  cfg.informative_days = 2;
  cfg.seed = 2;
  Dataset ds = generate(cfg);
  ModelSpec base = small_spec(ds, cfg.x_days);

  ModelJob full = build_ablation("full", base, {1, 1, 1});
  REQUIRE(full.specs.size() == 1);
  CHECK(full.specs[0].variant == Variant::full);
  CHECK(full.lambdas[0] == std::vector<double>{1, 1, 1});

  ModelJob single = build_ablation("single_task", base, {1, 1, 1});
  REQUIRE(single.specs.size() == 3);
  for (int n = 0; n < 3; ++n) {
    CHECK(single.specs[static_cast<std::size_t>(n)].variant == Variant::single_task);
    CHECK(single.specs[static_cast<std::size_t>(n)].task_index == n);
    std::vector<double> expect(3, 0.0);
    expect[static_cast<std::size_t>(n)] = 1.0;
    CHECK(single.lambdas[static_cast<std::size_t>(n)] == expect);
  }

  for (const char* kind :
       {"standard_lstm_gates", "no_soft_attention", "history_only_lstm"}) {
    ModelJob job = build_ablation(kind, base, {1, 1, 1});
    REQUIRE(job.specs.size() == 1);
    CHECK(variant_name(job.specs[0].variant) == std::string(kind));
  }

  CHECK_THROWS_AS(build_ablation("mlp", base, {1, 1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(build_ablation("full", base, {1, 1}), std::invalid_argument);
}

TEST_CASE("experiment harness compares the full model against itself") {
  SynthConfig cfg;
  cfg.num_students = 60;
  cfg.x_days = 4;
  cfg.informative_days = 2;
  cfg.seed = 7;
  Dataset ds = generate(cfg);
  ModelSpec base = small_spec(ds, cfg.x_days);
  base.config.num_units = 1;

  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 16;
  tc.seed = 1;
  ExperimentResult res = run_experiment(ds, base, {"full"}, tc, {4, 9});

  REQUIRE(res.models.size() == 2);
  REQUIRE(res.models[0].mse_per_seed.size() == 2);
  const std::size_t n_test = ds.split_indices("test").size();
  for (int n = 0; n < 3; ++n) {
    const auto un = static_cast<std::size_t>(n);
    CHECK(res.models[0].sq_errors[un].size() == 2 * n_test);
    CHECK(res.models[0].mean_mse[un] > 0.0);
    CHECK(res.rel_improvement[0][un] == 0.0);
    CHECK(res.p_values[0][un] == 1.0);
    CHECK(res.full_wins[0][un] == 0);  // ties are not wins
  }
  const std::string report = experiment_report(res);
  CHECK(report.find("full vs full") != std::string::npos);
  CHECK(report.find("mse_task3") != std::string::npos);

  // the relative-improvement convention: variant 15.10 vs full 12.16 -> 19.5%
  CHECK((15.10 - 12.16) / 15.10 == Approx(0.195).margin(5e-4));
  CHECK_THROWS_AS(run_experiment(ds, base, {}, tc, {}), std::invalid_argument);
}

TEST_CASE("single task copies only train their own branch") {
  SynthConfig cfg;
  cfg.num_students = 40;
  cfg.x_days = 4;
  cfg.informative_days = 2;
  cfg.seed = 13;
  Dataset ds = generate(cfg);
  ModelSpec base = small_spec(ds, cfg.x_days);
  base.config.num_units = 1;

  ModelJob job = build_ablation("single_task", base, {1, 1, 1});
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 20;
  tc.seed = 6;
  tc.lambdas = job.lambdas[0];
  TrainResult trained = train(ds, job.specs[0], tc);
  ParameterStore initial = make_parameters(job.specs[0], tc.seed);

  CHECK(trained.params.get("trend2/W_ih").data == initial.get("trend2/W_ih").data);
  CHECK(trained.params.get("head2/w").data == initial.get("head2/w").data);
  CHECK(trained.params.get("unit1/task3/W").data == initial.get("unit1/task3/W").data);
  CHECK(trained.params.get("trend1/W_ih").data != initial.get("trend1/W_ih").data);
}
