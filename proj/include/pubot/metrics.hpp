#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace pubot {

// Exact ROC AUC as the Mann-Whitney statistic, P(pos > neg) + P(tie) / 2.
// Throws Error if either class is missing or a score is NaN.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

inline constexpr double kDefaultTargetRecall = 0.99;

// Largest tau such that the share of scores >= tau is at least target_recall.
double threshold_at_recall(std::span<const double> positive_scores,
                           double target_recall = kDefaultTargetRecall);

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
};

struct PrecisionResult {
  double precision = 0.0;
  ConfusionCounts counts;
  bool no_positive_predicted = false;
};

// Predicted positive means score >= threshold. Precision is 0 (and flagged)
// when nothing is predicted positive.
PrecisionResult precision_at_threshold(std::span<const double> scores,
                                       std::span<const std::uint8_t> labels, double threshold);

}  // namespace pubot
