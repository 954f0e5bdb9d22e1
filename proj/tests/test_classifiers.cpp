#include <algorithm>
#include <cmath>
#include <random>

#include <doctest.h>

#include "pubot/classifiers.hpp"
#include "pubot/metrics.hpp"
#include "support.hpp"

using namespace pubot;

namespace {

RFConfig small_forest(std::uint64_t seed = 1) {
  RFConfig cfg;
  cfg.n_trees = 20;
  cfg.max_depth = 8;
  cfg.min_samples_leaf = 2;
  cfg.seed = seed;
  return cfg;
}

double accuracy(const ProbClassifier& c, const Matrix& x, const std::vector<std::uint8_t>& y) {
  auto p = c.predict_proba(x);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < y.size(); ++i) ok += (p[i] >= 0.5) == (y[i] == 1);
  return static_cast<double>(ok) / static_cast<double>(y.size());
}

}  // namespace

TEST_CASE("forest separates separable blobs") {
  Matrix x;
  std::vector<std::uint8_t> y;
  testing::gaussian_blobs(400, 2, 4.0, 3, x, y);
  auto rf = train_random_forest(x, y, small_forest());
  CHECK(accuracy(rf, x, y) == 1.0);
  CHECK(rf.trees().size() == 20);
  for (const auto& t : rf.trees()) CHECK(t.depth() <= 8);
}

TEST_CASE("forest is deterministic and thread-count independent") {
  Matrix x;
  std::vector<std::uint8_t> y;
  testing::gaussian_blobs(300, 5, 0.5, 8, x, y);
  auto cfg = small_forest(42);
  cfg.workers = 1;
  auto a = train_random_forest(x, y, cfg).predict_proba(x);
  cfg.workers = 4;
  auto b = train_random_forest(x, y, cfg).predict_proba(x);
  CHECK(a == b);
  cfg.seed = 43;
  CHECK(train_random_forest(x, y, cfg).predict_proba(x) != a);
}

TEST_CASE("forest scores are probabilities and row-order invariant") {
  Matrix x;
  std::vector<std::uint8_t> y;
  testing::gaussian_blobs(200, 3, 0.3, 4, x, y);
  auto rf = train_random_forest(x, y, small_forest());
  auto p = rf.predict_proba(x);
  for (double v : p) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  std::vector<std::size_t> order(x.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = order.size() - 1 - i;
  auto q = rf.predict_proba(x.select_rows(order));
  for (std::size_t i = 0; i < order.size(); ++i) CHECK(q[i] == p[order[i]]);

  Matrix wild(2, 3, std::vector<double>{1e300, -1e300, 0, -5e10, 7e12, 3});
  for (double v : rf.predict_proba(wild)) CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("forest errors") {
  Matrix x(4, 2, 1.0);
  CHECK_THROWS_WITH_AS(train_random_forest(x, std::vector<std::uint8_t>{1, 1, 1, 1}, small_forest()),
                       doctest::Contains("degenerate"), Error);
  RFConfig bad = small_forest();
  bad.n_trees = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  Matrix ok;
  std::vector<std::uint8_t> y;
  testing::gaussian_blobs(50, 2, 2.0, 1, ok, y);
  auto rf = train_random_forest(ok, y, small_forest());
  CHECK_THROWS_AS(rf.predict_proba(Matrix(1, 3)), Error);
}

TEST_CASE("forest leaves hold Laplace-smoothed frequencies") {
  // A single feature with one clean cut and no bootstrap: each side of the
  // root is pure, so leaves are (n + 1) / (n + 2) and 1 / (n + 2).
  Matrix x(20, 1);
  std::vector<std::uint8_t> y(20);
  for (std::size_t i = 0; i < 20; ++i) {
    x(i, 0) = static_cast<double>(i);
    y[i] = i >= 12;
  }
  RFConfig cfg = small_forest();
  cfg.n_trees = 1;
  cfg.bootstrap = false;
  cfg.min_samples_leaf = 1;
  auto rf = train_random_forest(x, y, cfg);
  CHECK(rf.predict_row(std::vector<double>{0.0}) == doctest::Approx(1.0 / 14.0).epsilon(1e-15));
  CHECK(rf.predict_row(std::vector<double>{19.0}) == doctest::Approx(9.0 / 10.0).epsilon(1e-15));
  const auto& root = rf.trees()[0].nodes[0];
  CHECK(root.feature == 0);
  CHECK(root.threshold == 11.5);
}

TEST_CASE("forest prediction is the mean of leaf values") {
  DecisionTree stub{{TreeNode{-1, 0.0, -1, -1, 0.7}}};
  RandomForest one(2, {stub});
  CHECK(one.predict_row(std::vector<double>{5, -5}) == 0.7);
  DecisionTree other{{TreeNode{-1, 0.0, -1, -1, 0.2}}};
  RandomForest two(2, {stub, other});
  CHECK(two.predict_row(std::vector<double>{0, 0}) == doctest::Approx(0.45));
}

TEST_CASE("forest json round trip") {
  Matrix x;
  std::vector<std::uint8_t> y;
  testing::gaussian_blobs(120, 3, 0.8, 2, x, y);
  auto rf = train_random_forest(x, y, small_forest());
  auto back = classifier_from_json(nlohmann::json::parse(rf.to_json().dump()));
  CHECK(back->kind() == ClassifierKind::random_forest);
  CHECK(back->predict_proba(x) == rf.predict_proba(x));
}

TEST_CASE("forest config json accepts sqrt") {
  auto cfg = nlohmann::json{{"n_trees", 7}, {"features_per_split", "sqrt"}}.get<RFConfig>();
  CHECK(cfg.n_trees == 7);
  CHECK(cfg.resolved_features_per_split(41) == 6);
  RFConfig two;
  two.features_per_split = 2;
  CHECK(two.resolved_features_per_split(41) == 2);
}

TEST_CASE("linear svm separates blobs") {
  Matrix x;
  std::vector<std::uint8_t> y;
  testing::gaussian_blobs(400, 2, 3.0, 6, x, y);
  SVMConfig cfg;
  cfg.seed = 3;
  auto svm = train_weighted_linear_svm(x, y, cfg);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < y.size(); ++i) ok += (svm.margin(x.row(i)) > 0) == (y[i] == 1);
  CHECK(ok == y.size());
  CHECK(roc_auc(svm.predict_proba(x), y) == 1.0);
  // Calibrated scores increase with the margin.
  CHECK(svm.sigmoid_a() < 0.0);
}

TEST_CASE("positive class weight raises positive recall") {
  Matrix x;
  std::vector<std::uint8_t> y;
  testing::gaussian_blobs(600, 4, 0.4, 12, x, y);
  auto recall = [&](const LinearSvm& m) {
    std::size_t tp = 0, pos = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (!y[i]) continue;
      ++pos;
      tp += m.margin(x.row(i)) > 0;
    }
    return static_cast<double>(tp) / static_cast<double>(pos);
  };
  SVMConfig sym;
  sym.seed = 1;
  SVMConfig heavy = sym;
  heavy.positive_class_weight = 16.0;
  CHECK(recall(train_weighted_linear_svm(x, y, heavy)) >= recall(train_weighted_linear_svm(x, y, sym)));
}

TEST_CASE("unit class weights equal an unweighted run") {
  Matrix x;
  std::vector<std::uint8_t> y;
  testing::gaussian_blobs(200, 3, 1.0, 2, x, y);
  SVMConfig a;
  a.seed = 9;
  SVMConfig b = a;
  b.positive_class_weight = 1.0;
  b.negative_class_weight = 1.0;
  auto ma = train_weighted_linear_svm(x, y, a);
  auto mb = train_weighted_linear_svm(x, y, b);
  for (std::size_t i = 0; i < x.rows(); ++i) CHECK(ma.margin(x.row(i)) == mb.margin(x.row(i)));
}

TEST_CASE("svm config and divergence errors") {
  SVMConfig bad;
  bad.positive_class_weight = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  Matrix x;
  std::vector<std::uint8_t> y;
  testing::gaussian_blobs(50, 2, 1.0, 1, x, y);
  SVMConfig wild;
  wild.learning_rate = 1e300;
  wild.decay = 0.0;
  for (auto& v : x.values()) v *= 1e10;
  CHECK_THROWS_WITH_AS(train_weighted_linear_svm(x, y, wild), doctest::Contains("diverged"), Error);
}

TEST_CASE("platt sigmoid recovers a known logistic relation") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-4, 4);
  std::vector<double> f(20000);
  std::vector<std::uint8_t> y(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    f[i] = u(rng);
    const double p = 1.0 / (1.0 + std::exp(-1.5 * f[i] + 0.5));
    y[i] = std::bernoulli_distribution(p)(rng);
  }
  auto [a, b] = fit_platt_sigmoid(f, y);
  CHECK(a == doctest::Approx(-1.5).epsilon(0.1));
  CHECK(b == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("svm and constant json round trip") {
  LinearSvm svm({0.5, -1.25}, 0.1, -2.0, 0.3);
  auto back = classifier_from_json(nlohmann::json::parse(svm.to_json().dump()));
  const std::vector<double> row{0.7, 0.2};
  CHECK(back->predict_row(row) == svm.predict_row(row));
  CHECK(svm.predict_row(row) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0 * (0.35 - 0.25 + 0.1) + 0.3))));

  ConstantClassifier c(3, 0.25);
  auto cb = classifier_from_json(c.to_json());
  CHECK(cb->kind() == ClassifierKind::constant);
  CHECK(cb->predict_row(std::vector<double>{1, 2, 3}) == 0.25);
  CHECK_THROWS_AS(classifier_from_json(nlohmann::json{{"kind", "tree-of-life"}}), ParseError);
}
