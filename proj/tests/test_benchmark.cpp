#include <algorithm>
#include <cmath>
#include <sstream>

#include <doctest.h>

#include "pubot/benchmark.hpp"
#include "support.hpp"

using namespace pubot;

namespace {

BenchmarkConfig small_config() {
  BenchmarkConfig cfg;
  cfg.master_seed = 5;
  cfg.replicates = 2;
  cfg.mixings = {0.0, 100.0};
  cfg.toppers = {0.9};
  cfg.oracle_forest.n_trees = 15;
  cfg.oracle_forest.seed = 0;
  cfg.fit.forest.n_trees = 10;
  cfg.fit.forest.max_depth = 8;
  cfg.fit.svm_positive_weights = {1.0, 8.0};
  return cfg;
}

const BenchmarkContext& shared_context() {
  static const BenchmarkContext ctx =
      prepare_benchmark(small_config(), testing::synthetic_records(3000, 77));
  return ctx;
}

}  // namespace

TEST_CASE("cell enumeration") {
  BenchmarkConfig cfg;
  cfg.replicates = 1;
  CHECK(enumerate_cells(cfg).size() == 32);
  cfg.methods = {PUMethod::eam};
  CHECK(enumerate_cells(cfg).size() == 8);
  cfg.replicates = 3;
  CHECK(enumerate_cells(cfg).size() == 24);
}

TEST_CASE("config validation and json") {
  BenchmarkConfig cfg;
  cfg.validate();
  CHECK(cfg.fit.mam_single_subgroup_fallback);
  CHECK_FALSE(PUFitConfig{}.mam_single_subgroup_fallback);

  auto bad = cfg;
  bad.toppers = {1.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.mixings = {120.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.replicates = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  cfg.methods = {PUMethod::ram, PUMethod::eam};
  cfg.master_seed = 99;
  cfg.data_dir = "/somewhere";
  auto back = nlohmann::json(cfg).get<BenchmarkConfig>();
  CHECK(back.methods == cfg.methods);
  CHECK(back.master_seed == 99);
  CHECK(back.data_dir == cfg.data_dir);
  CHECK(back.toppers == cfg.toppers);

  testing::TempDir dir("cfg");
  testing::write_text(dir / "c.json", R"({
    // comments are allowed
    "methods": ["EAM", "biasedsvm"], "replicates": 3
  })");
  auto loaded = load_benchmark_config(dir / "c.json");
  CHECK(loaded.methods == std::vector<PUMethod>{PUMethod::eam, PUMethod::biased_svm});
  CHECK(loaded.replicates == 3);
  CHECK(loaded.mixings.size() == 4);
  testing::write_text(dir / "fit.json", R"({"fit": {"denominator_floor": 0.05}})");
  auto partial = load_benchmark_config(dir / "fit.json");
  CHECK(partial.fit.denominator_floor == 0.05);
  CHECK(partial.fit.mam_single_subgroup_fallback);
  testing::write_text(dir / "bad.json", R"({"methods": ["SVM"]})");
  CHECK_THROWS_AS(load_benchmark_config(dir / "bad.json"), ConfigError);
  CHECK_THROWS_AS(load_benchmark_config(dir / "none.json"), ConfigError);
}

TEST_CASE("seeds") {
  CHECK(simulation_seed(1, 0.9, 30, 0) == simulation_seed(1, 0.9, 30, 0));
  CHECK(simulation_seed(1, 0.9, 30, 0) != simulation_seed(1, 0.9, 30, 1));
  CHECK(simulation_seed(1, 0.9, 30, 0) != simulation_seed(1, 0.925, 30, 0));
  CHECK(cell_seed(1, 0.9, 30, PUMethod::eam, 0) != cell_seed(1, 0.9, 30, PUMethod::ram, 0));
}

TEST_CASE("oracle and cells on synthetic records") {
  const auto& ctx = shared_context();
  CHECK(ctx.oracle_test_auc > 0.9);
  auto cfg = small_config();
  for (auto method : {PUMethod::eam, PUMethod::mam, PUMethod::ram, PUMethod::biased_svm}) {
    for (double m : {0.0, 30.0, 100.0}) {
      CAPTURE(to_string(method));
      CAPTURE(m);
      auto r = run_cell(cfg, ctx, CellSpec{0.9, m, method, 0});
      CHECK(r.ok());
      CHECK(r.method == to_string(method));
      CHECK((r.auc >= 0.0 && r.auc <= 1.0));
      CHECK((r.precision_at_recall99 >= 0.0 && r.precision_at_recall99 <= 1.0));
      CHECK(r.counts.tp + r.counts.fp + r.counts.tn + r.counts.fn == ctx.data.test.rows());
      if (method != PUMethod::biased_svm) CHECK(r.auc > 0.7);
    }
  }
}

TEST_CASE("run_cell is deterministic and reports stage errors") {
  const auto& ctx = shared_context();
  auto cfg = small_config();
  CellSpec cell{0.9, 30.0, PUMethod::ram, 1};
  auto a = run_cell(cfg, ctx, cell);
  auto b = run_cell(cfg, ctx, cell);
  std::ostringstream sa, sb;
  write_reports(sa, {a});
  write_reports(sb, {b});
  CHECK(sa.str() == sb.str());

  // MAM without the fallback fails at m = 0 because every labeled row is b = 1.
  cfg.fit.mam_single_subgroup_fallback = false;
  CHECK_THROWS_WITH(run_cell(cfg, ctx, CellSpec{0.9, 0.0, PUMethod::mam, 0}), doctest::Contains("fit: "));
  CHECK_THROWS_WITH(run_cell(cfg, ctx, CellSpec{1.5, 0.0, PUMethod::eam, 0}), doctest::Contains("simulate: "));
}

TEST_CASE("evaluation uses validation positives for the threshold") {
  const auto& ctx = shared_context();
  auto sim = simulate(ctx.data, ctx.train_scores, ctx.val_scores, SimulationConfig{0.5, 100.0, 3});
  auto model = PUModel::eam(std::make_shared<ConstantClassifier>(ctx.data.train.features.dims(), 0.3),
                            LabelFrequency(0.6));
  auto r = evaluate_model(model, sim);
  CHECK(r.auc == 0.5);
  CHECK(r.threshold == 0.5);
  CHECK(r.counts.tp + r.counts.fp == ctx.data.test.rows());
  const double base = static_cast<double>(std::count(sim.test.y_eval.begin(), sim.test.y_eval.end(), 1)) /
                      static_cast<double>(sim.test.y_eval.size());
  CHECK(r.precision_at_recall99 == doctest::Approx(base));
}

TEST_CASE("grid records failures, is order independent and summarizes") {
  const auto& ctx = shared_context();
  auto cfg = small_config();
  cfg.methods = {PUMethod::eam, PUMethod::mam};
  cfg.fit.mam_single_subgroup_fallback = false;
  std::size_t seen = 0;
  auto serial = run_grid(cfg, ctx, [&](const EvaluationReport&) { ++seen; });
  CHECK(seen == enumerate_cells(cfg).size());
  CHECK(serial.reports.size() == 8);
  std::size_t failed = 0;
  for (const auto& r : serial.reports) {
    if (!r.ok()) {
      ++failed;
      CHECK(r.method == "MAM");
      CHECK(std::isnan(r.auc));
    }
  }
  CHECK(failed >= 2);

  cfg.workers = 3;
  auto parallel = run_grid(cfg, ctx);
  CHECK(parallel.reports == serial.reports);

  auto reversed = serial.reports;
  std::reverse(reversed.begin(), reversed.end());
  auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
  auto s1 = summarize(serial.reports);
  auto s2 = summarize(reversed);
  REQUIRE(s1.size() == s2.size());
  REQUIRE(s1.size() == 4);
  for (std::size_t i = 0; i < s1.size(); ++i) {
    CHECK(s1[i].method == s2[i].method);
    CHECK(same(s1[i].auc_mean, s2[i].auc_mean));
    CHECK(same(s1[i].auc_std, s2[i].auc_std));
  }
  for (const auto& s : s1) {
    if (s.method == "EAM") {
      CHECK(s.runs == 2);
      CHECK(s.auc_std >= 0.0);
    }
  }
}

TEST_CASE("summary statistics") {
  std::vector<EvaluationReport> reports(3);
  const double aucs[3] = {0.7, 0.8, 0.9};
  for (std::size_t i = 0; i < 3; ++i) {
    reports[i].method = "RAM";
    reports[i].topper = 0.9;
    reports[i].replicate = i;
    reports[i].auc = aucs[i];
    reports[i].precision_at_recall99 = 0.5;
  }
  auto s = summarize(reports);
  REQUIRE(s.size() == 1);
  CHECK(s[0].auc_mean == doctest::Approx(0.8));
  CHECK(s[0].auc_std == doctest::Approx(0.1));
  CHECK(s[0].precision_std == 0.0);
  reports[2].error = "boom";
  s = summarize(reports);
  CHECK(s[0].runs == 2);
  CHECK(s[0].failures == 1);
}

TEST_CASE("reports round trip losslessly") {
  EvaluationReport a;
  a.method = "BiasedSVM";
  a.topper = 0.925;
  a.mixing = 70;
  a.replicate = 4;
  a.seed = 0xfedcba9876543210ULL;
  a.auc = 0.1 + 0.2;
  a.precision_at_recall99 = 1.0 / 3.0;
  a.threshold = 5e-324;
  a.counts = {1, 2, 3, 4};
  a.no_positive_predicted = true;
  EvaluationReport b;
  b.method = "MAM";
  b.auc = b.precision_at_recall99 = b.threshold = std::nan("");
  b.error = "fit: MAM requires both subgroups";
  std::stringstream ss;
  write_reports(ss, {a, b});
  auto back = read_reports(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == a);
  CHECK(back[1] == b);

  std::stringstream empty;
  CHECK_THROWS_AS(read_reports(empty), ParseError);
  std::stringstream bad("header\n1\t2\n");
  CHECK_THROWS_AS(read_reports(bad), ParseError);
}

TEST_CASE("results table marks best and second best") {
  std::vector<CellSummary> s;
  const char* methods[3] = {"EAM", "RAM", "MAM"};
  const double auc[3] = {0.70, 0.90, 0.80};
  for (int i = 0; i < 3; ++i) {
    CellSummary c;
    c.topper = 0.9;
    c.mixing = 0;
    c.method = methods[i];
    c.runs = 1;
    c.auc_mean = auc[i];
    c.precision_mean = 0.15 + 0.1 * i;
    s.push_back(c);
  }
  auto table = format_results_table(s);
  CHECK(table.find("0.900**") != std::string::npos);
  CHECK(table.find("0.800*") != std::string::npos);
  CHECK(table.find("0.700*") == std::string::npos);
  CHECK(table.find("t=0.9") != std::string::npos);
}
