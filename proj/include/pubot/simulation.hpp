#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "pubot/classifiers.hpp"
#include "pubot/dataset.hpp"
#include "pubot/pu_models.hpp"

namespace pubot {

// One biased-labeling scenario: keep positives above the topper quantile of
// the oracle scores, then swap mixing_m percent of them for random positives.
struct SimulationConfig {
  double topper_t = 0.9;
  double mixing_m = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// One split of a simulated dataset. y_eval is ground truth for evaluation
// only; nothing in training reads it.
struct PUSplit {
  PUSet data;
  std::vector<std::uint8_t> y_eval;
  std::vector<std::uint64_t> ids;
};

struct PUDataset {
  PUSplit train;
  PUSplit val;
  PUSplit test;
};

// Supervised random forest on the true labels.
std::shared_ptr<const RandomForest> train_oracle(const LabeledDataset& train, const RFConfig& cfg);

struct PositiveScores {
  std::vector<std::size_t> rows;  // row positions of the positives
  std::vector<double> scores;
};

PositiveScores score_positives(const ProbClassifier& oracle, const LabeledDataset& data);

// Linear-interpolation quantile of the values (the numpy default).
double empirical_quantile(std::span<const double> values, double q);

// Ids whose score is strictly above the t-quantile of all scores, ascending.
std::vector<std::size_t> apply_topper(std::span<const std::size_t> positive_ids,
                                      std::span<const double> scores, double t);

struct LabeledSubset {
  std::vector<std::size_t> ids;  // ascending, unique
  std::vector<std::int8_t> b;    // 1 = kept from the topper set, 0 = swapped in
};

// Removes ceil(m% * |selected|) selected ids chosen without replacement and
// draws as many ids with replacement from all positives. Drawn ids that are
// already present (or repeat) collapse into one entry; survivors keep b = 1.
// m = 0 consumes no randomness.
LabeledSubset apply_mixing(std::span<const std::size_t> selected,
                           std::span<const std::size_t> all_positive_ids, double m,
                           std::uint64_t seed);

// Labels the given training/validation rows (s = 1 with their b flags);
// everything else is unlabeled. Throws if the training subset is empty or
// names a row that is not a positive of its split.
PUDataset assemble_pu_dataset(const LabeledDataset& train, const LabeledDataset& val,
                              const LabeledDataset& test, const LabeledSubset& train_labeled,
                              const LabeledSubset& val_labeled);

// Topper + mixing on the training positives and, with an independent seed, on
// the validation positives.
PUDataset simulate(const PreparedData& data, const PositiveScores& train_scores,
                   const PositiveScores& val_scores, const SimulationConfig& cfg);

// Columns: id,f0..fN,s,b,y_eval. b is empty on unlabeled rows.
void write_pu_csv(const std::filesystem::path& path, const PUSplit& split);

}  // namespace pubot
