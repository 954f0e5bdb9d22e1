#include "pubot/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "pubot/common.hpp"

namespace pubot {

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw Error("roc_auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  for (double s : scores) {
    if (std::isnan(s)) throw Error("roc_auc: NaN score");
  }
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  // Twice the concordant count plus ties, kept in integers so the result is exact.
  std::uint64_t negatives_below = 0;
  std::uint64_t positives = 0;
  std::uint64_t doubled = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? pos : neg) += 1;
      ++j;
    }
    doubled += 2 * pos * negatives_below + pos * neg;
    negatives_below += neg;
    positives += pos;
    i = j;
  }
  if (positives == 0 || negatives_below == 0) {
    throw Error("roc_auc: both classes are required");
  }
  return static_cast<double>(doubled) /
         (2.0 * static_cast<double>(positives) * static_cast<double>(negatives_below));
}

double threshold_at_recall(std::span<const double> positive_scores, double target_recall) {
  if (positive_scores.empty()) throw Error("threshold_at_recall: no scores");
  if (!(target_recall > 0.0 && target_recall <= 1.0)) {
    throw ConfigError("threshold_at_recall: target recall must be in (0, 1]");
  }
  std::vector<double> sorted(positive_scores.begin(), positive_scores.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double n = static_cast<double>(sorted.size());
  // Smallest k with k / n >= target; the 1e-9 slack absorbs products like 0.99 * 100.
  auto k = static_cast<std::size_t>(std::ceil(target_recall * n - 1e-9));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  return sorted[k - 1];
}

PrecisionResult precision_at_threshold(std::span<const double> scores,
                                       std::span<const std::uint8_t> labels, double threshold) {
  if (scores.size() != labels.size()) {
    throw Error("precision_at_threshold: scores and labels differ in length");
  }
  PrecisionResult out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (predicted) {
      (labels[i] ? out.counts.tp : out.counts.fp) += 1;
    } else {
      (labels[i] ? out.counts.fn : out.counts.tn) += 1;
    }
  }
  const auto predicted_pos = out.counts.tp + out.counts.fp;
  if (predicted_pos == 0) {
    out.no_positive_predicted = true;
    out.precision = 0.0;
  } else {
    out.precision = static_cast<double>(out.counts.tp) / static_cast<double>(predicted_pos);
  }
  return out;
}

}  // namespace pubot
