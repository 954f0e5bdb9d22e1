#include <algorithm>

#include <doctest.h>

#include "pubot/session_pipeline.hpp"
#include "support.hpp"

using namespace pubot;

namespace {

SessionTable store_table(std::uint64_t seed) {
  auto log = testing::synthetic_store_log(600, 150, 0.15, seed);
  auto sessions = sessionize(log.hits);
  std::vector<CidrBlock> cloud;
  for (const auto& r : log.cloud_ranges) cloud.push_back(CidrBlock::parse(r));
  return make_session_table(sessions, tag_pu_labels(sessions, purchaser_visitors(sessions), cloud));
}

SessionFitOptions fast_options(PUMethod method) {
  SessionFitOptions o;
  o.method = method;
  o.fit.forest.n_trees = 30;
  o.split.seed = 3;
  o.fit.forest.seed = 3;
  return o;
}

}  // namespace

TEST_CASE("purchaser sessions are predicted human on learnable synthetic traffic") {
  auto table = store_table(1);
  for (auto method : {PUMethod::ram, PUMethod::eam}) {
    CAPTURE(to_string(method));
    auto bundle = fit_session_model(table, fast_options(method));
    REQUIRE(bundle.threshold.has_value());
    CHECK(bundle.standardization.size() == session_feature_names().size());
    auto scoring = score_sessions(bundle, table);
    CHECK(scoring.threshold == *bundle.threshold);
    REQUIRE(scoring.positive.sessions > 0);
    REQUIRE(scoring.eval_negative.sessions > 0);
    const double pos_rate = static_cast<double>(scoring.positive.predicted_human) /
                            static_cast<double>(scoring.positive.sessions);
    const double neg_rate = static_cast<double>(scoring.eval_negative.predicted_human) /
                            static_cast<double>(scoring.eval_negative.sessions);
    CHECK(pos_rate >= 0.99);
    CHECK(neg_rate < 0.05);
    CHECK(scoring.total.sessions == table.rows());
    CHECK(scoring.positive.sessions + scoring.eval_negative.sessions + scoring.unlabeled.sessions ==
          table.rows());
  }
}

TEST_CASE("scoring options and edge cases") {
  auto table = store_table(2);
  auto bundle = fit_session_model(table, fast_options(PUMethod::ram));

  auto none = score_sessions(bundle, table, 1.5);
  CHECK(none.no_humans_predicted);
  CHECK(none.total.predicted_human == 0);
  CHECK(format_session_summary(none).find("no humans predicted") != std::string::npos);

  auto all = score_sessions(bundle, table, 0.0);
  CHECK(all.total.predicted_human == table.rows());

  ModelBundle no_threshold = bundle;
  no_threshold.threshold.reset();
  auto own = score_sessions(no_threshold, table);
  std::vector<double> known;
  for (std::size_t i = 0; i < table.rows(); ++i) {
    if (table.s[i]) known.push_back(own.scores[i]);
  }
  CHECK(own.threshold <= *std::min_element(known.begin(), known.end()) + 1.0);
  CHECK(own.positive.predicted_human >= static_cast<std::size_t>(0.99 * static_cast<double>(known.size())));

  SessionTable empty;
  empty.features = Matrix(0, table.features.cols());
  auto e = score_sessions(bundle, empty);
  CHECK(e.scores.empty());
  CHECK(e.total.sessions == 0);
  CHECK(e.no_humans_predicted);

  SessionTable narrow = table;
  narrow.features = Matrix(table.rows(), 3);
  CHECK_THROWS_WITH(score_sessions(bundle, narrow), doctest::Contains("dimension mismatch"));
}

TEST_CASE("session model bundle and score file") {
  auto table = store_table(4);
  auto bundle = fit_session_model(table, fast_options(PUMethod::eam));
  testing::TempDir dir("session-model");
  save_bundle(dir / "m.json", bundle);
  auto back = load_bundle(dir / "m.json");
  auto a = score_sessions(bundle, table);
  auto b = score_sessions(back, table);
  CHECK(a.scores == b.scores);
  CHECK(a.threshold == b.threshold);

  write_session_scores(dir / "scores.csv", table, a);
  auto text = testing::read_text(dir / "scores.csv");
  CHECK(text.rfind("session_id,visitor_id,class,score,is_human\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == table.rows() + 1);
}
