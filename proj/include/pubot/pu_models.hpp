#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pubot/classifiers.hpp"
#include "pubot/common.hpp"
#include "pubot/dataset.hpp"

namespace pubot {

// Positive-unlabeled training data. `s` marks labeled rows (known positives).
// `b` is the labeled-subgroup flag: 1 for the feature-dependent subgroup, 0 for
// the random one, -1 where undefined. It may only be set on rows with s = 1.
struct PUSet {
  Matrix x;
  std::vector<std::uint8_t> s;
  std::vector<std::int8_t> b;

  std::size_t rows() const { return s.size(); }
  std::size_t labeled() const;
  // Throws Error when sizes disagree or a b flag sits on an unlabeled row.
  void validate() const;
};

// Probability that a positive is labeled; always in (0, 1].
class LabelFrequency {
 public:
  static constexpr double kMin = 1e-4;

  explicit LabelFrequency(double c);
  // Clamps into [kMin, 1].
  static LabelFrequency clamped(double c);

  double value() const { return c_; }

 private:
  double c_;
};

enum class PUMethod { eam, mam, ram, biased_svm };

std::string to_string(PUMethod method);
// Accepts EAM, MAM, RAM, BiasedSVM (case-insensitive). Throws ConfigError otherwise.
PUMethod parse_method(std::string_view name);

// The three estimator formulas, each clipped to [0, 1].
double eam_score(double numerator, double c);
double mam_score(double numerator, double c, double propensity);
double ram_score(double numerator, double denominator, double floor);

inline constexpr double kDefaultDenominatorFloor = 0.01;

// A fitted PU estimator of p(y = 1 | x).
class PUModel {
 public:
  static PUModel eam(std::shared_ptr<const ProbClassifier> numerator, LabelFrequency c);
  static PUModel mam(std::shared_ptr<const ProbClassifier> numerator, LabelFrequency c,
                     std::shared_ptr<const ProbClassifier> propensity);
  static PUModel ram(std::shared_ptr<const ProbClassifier> numerator,
                     std::shared_ptr<const ProbClassifier> propensity,
                     double denominator_floor = kDefaultDenominatorFloor);
  static PUModel biased_svm(std::shared_ptr<const ProbClassifier> svm);

  PUMethod method() const { return method_; }
  const ProbClassifier& numerator() const { return *numerator_; }
  const ProbClassifier* propensity() const { return propensity_.get(); }
  std::optional<LabelFrequency> label_frequency() const { return c_; }
  double denominator_floor() const { return floor_; }
  std::size_t feature_dims() const { return numerator_->feature_dims(); }

  double score_row(std::span<const double> x) const;
  // Throws Error on a dimension mismatch.
  std::vector<double> score(const Matrix& x) const;

  nlohmann::json to_json() const;
  static PUModel from_json(const nlohmann::json& j);

 private:
  PUModel(PUMethod method, std::shared_ptr<const ProbClassifier> numerator,
          std::optional<LabelFrequency> c, std::shared_ptr<const ProbClassifier> propensity,
          double floor);

  PUMethod method_;
  std::shared_ptr<const ProbClassifier> numerator_;
  std::optional<LabelFrequency> c_;
  std::shared_ptr<const ProbClassifier> propensity_;
  double floor_;
};

struct MiningConfig {
  // Shortlist size per known positive before the exact re-ranking.
  std::size_t candidates = 10;
  std::size_t per_positive = 1;
};

struct MiningResult {
  std::vector<std::size_t> ids;  // sorted, unique, all with s = 0
  bool insufficient_unlabeled = false;
};

struct PUFitConfig {
  RFConfig forest;
  MiningConfig mining;
  SVMConfig svm;
  // Candidate positive-class weights for the biased SVM; the negative weight is 1.
  std::vector<double> svm_positive_weights{0.5, 1.0, 2.0, 4.0, 8.0, 16.0};
  double denominator_floor = kDefaultDenominatorFloor;
  // When the labeled set holds only one subgroup, reduce MAM to a constant
  // propensity (1 without b = 0 rows, 0 without b = 1 rows) instead of failing.
  bool mam_single_subgroup_fallback = false;
};

void to_json(nlohmann::json& j, const PUFitConfig& cfg);
void from_json(const nlohmann::json& j, PUFitConfig& cfg);

// Classifier for p(s = 1 | x): labeled rows against unlabeled rows.
std::shared_ptr<const ProbClassifier> fit_numerator(const PUSet& train, const RFConfig& cfg);

enum class CSubgroup { all_labeled, b0_only };

// Mean numerator score over the labeled validation rows (or the b = 0 ones),
// clamped to [1e-4, 1]. Throws Error("cannot estimate c ...") on an empty subgroup.
LabelFrequency estimate_c(const ProbClassifier& numerator, const PUSet& val, CSubgroup subgroup);

PUModel fit_eam(const PUSet& train, const PUSet& val, const PUFitConfig& cfg);
PUModel fit_mam(const PUSet& train, const PUSet& val, const PUFitConfig& cfg);
PUModel fit_ram(const PUSet& train, const PUFitConfig& cfg);
PUModel fit_biased_svm(const PUSet& train, const PUSet& val, const PUFitConfig& cfg);
PUModel fit_pu_model(PUMethod method, const PUSet& train, const PUSet& val,
                     const PUFitConfig& cfg);

// For every labeled row, its `per_positive` nearest unlabeled rows by
// Euclidean distance (ties to the lower row index). A BLAS-style distance
// expansion builds a shortlist that is re-ranked with exact distances.
MiningResult mine_pseudo_unlabeled_positives(const PUSet& train, const MiningConfig& cfg);

// A model plus what is needed to score raw feature rows with it.
struct ModelBundle {
  PUModel model;
  std::vector<ColumnStats> standardization;  // empty when inputs are pre-standardized
  std::optional<double> threshold;
  std::vector<std::string> feature_names;
};

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle load_bundle(const std::filesystem::path& path);

}  // namespace pubot
