#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pubot/common.hpp"

namespace pubot {

enum class ClassifierKind { random_forest, weighted_linear_svm, constant };

std::string to_string(ClassifierKind kind);

// A trained binary classifier producing a positive-class score in [0, 1].
class ProbClassifier {
 public:
  virtual ~ProbClassifier() = default;

  virtual ClassifierKind kind() const = 0;
  virtual std::size_t feature_dims() const = 0;
  // No dimension check; callers go through predict_proba or check themselves.
  virtual double predict_row(std::span<const double> x) const = 0;
  virtual nlohmann::json to_json() const = 0;

  // Throws Error on a dimension mismatch.
  std::vector<double> predict_proba(const Matrix& x) const;
};

std::unique_ptr<ProbClassifier> classifier_from_json(const nlohmann::json& j);

// Predicts the same value everywhere. Used when a training set holds one class only.
class ConstantClassifier final : public ProbClassifier {
 public:
  ConstantClassifier(std::size_t dims, double value);

  ClassifierKind kind() const override { return ClassifierKind::constant; }
  std::size_t feature_dims() const override { return dims_; }
  double predict_row(std::span<const double>) const override { return value_; }
  nlohmann::json to_json() const override;

  double value() const { return value_; }

 private:
  std::size_t dims_;
  double value_;
};

// ---------------------------------------------------------------------------
// Random forest

struct RFConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 20;
  std::size_t min_samples_leaf = 5;
  std::size_t features_per_split = 0;  // 0 means floor(sqrt(dims))
  bool bootstrap = true;
  // Features with more distinct training values than this are quantile-binned.
  std::size_t max_bins = 255;
  std::uint64_t seed = 0;
  std::size_t workers = 0;  // 0 = hardware concurrency

  void validate() const;
  std::size_t resolved_features_per_split(std::size_t dims) const;
};

void to_json(nlohmann::json& j, const RFConfig& cfg);
void from_json(const nlohmann::json& j, RFConfig& cfg);

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // x[feature] <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.5;  // smoothed positive frequency; meaningful on leaves
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const;
  std::size_t depth() const;
};

class RandomForest final : public ProbClassifier {
 public:
  RandomForest(std::size_t dims, std::vector<DecisionTree> trees);

  ClassifierKind kind() const override { return ClassifierKind::random_forest; }
  std::size_t feature_dims() const override { return dims_; }
  // Mean over trees of the leaf positive-class frequency.
  double predict_row(std::span<const double> x) const override;
  nlohmann::json to_json() const override;

  const std::vector<DecisionTree>& trees() const { return trees_; }
  static RandomForest from_json(const nlohmann::json& j);

 private:
  std::size_t dims_;
  std::vector<DecisionTree> trees_;
};

// CART trees on bootstrap samples with Gini splits over per-node random feature
// subsets. Leaves store (pos + 1) / (n + 2). Split ties go to the lowest
// feature index, then the lowest threshold. Throws Error("degenerate training
// set") when y holds a single class.
RandomForest train_random_forest(const Matrix& x, std::span<const std::uint8_t> y,
                                 const RFConfig& cfg);

// ---------------------------------------------------------------------------
// Class-weighted linear SVM

struct SVMConfig {
  double positive_class_weight = 1.0;
  double negative_class_weight = 1.0;
  double regularization = 1e-4;
  std::size_t epochs = 10;
  double learning_rate = 0.05;
  double decay = 1e-4;  // rate_t = learning_rate / (1 + decay * t)
  // Share of the training rows held out for the sigmoid calibration.
  double calibration_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const SVMConfig& cfg);
void from_json(const nlohmann::json& j, SVMConfig& cfg);

class LinearSvm final : public ProbClassifier {
 public:
  LinearSvm(std::vector<double> weights, double bias, double sigmoid_a, double sigmoid_b);

  ClassifierKind kind() const override { return ClassifierKind::weighted_linear_svm; }
  std::size_t feature_dims() const override { return weights_.size(); }
  // 1 / (1 + exp(a * margin + b))
  double predict_row(std::span<const double> x) const override;
  nlohmann::json to_json() const override;

  double margin(std::span<const double> x) const;
  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }
  double sigmoid_a() const { return a_; }
  double sigmoid_b() const { return b_; }

  static LinearSvm from_json(const nlohmann::json& j);

 private:
  std::vector<double> weights_;
  double bias_;
  double a_;
  double b_;
};

// Averaged stochastic subgradient descent on
//   lambda/2 |w|^2 + mean_i C_{y_i} * max(0, 1 - y_i (w.x_i + b))
// followed by a Platt sigmoid fitted on a held-out share of the rows.
LinearSvm train_weighted_linear_svm(const Matrix& x, std::span<const std::uint8_t> y,
                                    const SVMConfig& cfg);

// Platt's sigmoid fit (Newton with backtracking) on decision values.
// Returns (a, b) for p = 1 / (1 + exp(a * f + b)).
std::pair<double, double> fit_platt_sigmoid(std::span<const double> decision_values,
                                            std::span<const std::uint8_t> labels);

}  // namespace pubot
