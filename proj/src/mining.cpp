#include <algorithm>
#include <limits>

#include <Eigen/Dense>

#include "pubot/pu_models.hpp"

namespace pubot {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMatrix gather(const Matrix& x, const std::vector<std::size_t>& rows) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(x.cols()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = x.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(static_cast<Eigen::Index>(i)).data());
  }
  return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

constexpr Eigen::Index kBlock = 64;

}  // namespace

MiningResult mine_pseudo_unlabeled_positives(const PUSet& train, const MiningConfig& cfg) {
  train.validate();
  if (cfg.per_positive == 0) throw ConfigError("mining per_positive must be >= 1");

  std::vector<std::size_t> positives, unlabeled;
  for (std::size_t r = 0; r < train.rows(); ++r) (train.s[r] ? positives : unlabeled).push_back(r);

  MiningResult result;
  if (unlabeled.size() <= cfg.per_positive) {
    result.insufficient_unlabeled = unlabeled.size() < cfg.per_positive;
    if (!positives.empty()) result.ids = unlabeled;
    return result;
  }
  if (positives.empty()) return result;

  const std::size_t shortlist = std::max(cfg.candidates, cfg.per_positive);
  const RowMatrix u = gather(train.x, unlabeled);
  const Eigen::VectorXd u_norm = u.rowwise().squaredNorm();
  const double max_u_norm = u_norm.size() ? u_norm.maxCoeff() : 0.0;

  std::vector<std::uint8_t> chosen(unlabeled.size(), 0);
  std::vector<double> best;  // ascending approximate distances, at most `shortlist`
  std::vector<std::pair<double, std::size_t>> exact;

  for (std::size_t start = 0; start < positives.size(); start += kBlock) {
    const std::size_t stop = std::min(positives.size(), start + static_cast<std::size_t>(kBlock));
    const std::vector<std::size_t> block_rows(positives.begin() + start, positives.begin() + stop);
    const RowMatrix p = gather(train.x, block_rows);
    const Eigen::VectorXd p_norm = p.rowwise().squaredNorm();
    const RowMatrix cross = p * u.transpose();

    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      const double* g = cross.row(i).data();
      auto approx = [&](Eigen::Index j) { return p_norm[i] + u_norm[j] - 2.0 * g[j]; };

      best.clear();
      for (Eigen::Index j = 0; j < u.rows(); ++j) {
        const double d = approx(j);
        if (best.size() == shortlist && d >= best.back()) continue;
        auto at = std::upper_bound(best.begin(), best.end(), d);
        best.insert(at, d);
        if (best.size() > shortlist) best.pop_back();
      }
      // Everything within rounding distance of the shortlist boundary gets an
      // exact distance, so near-ties cannot be lost to expansion error.
      const double bound = best.back() + 1e-8 * (p_norm[i] + max_u_norm) + 1e-12;
      const auto pos_row = train.x.row(block_rows[static_cast<std::size_t>(i)]);
      exact.clear();
      for (Eigen::Index j = 0; j < u.rows(); ++j) {
        if (approx(j) <= bound) {
          exact.emplace_back(squared_distance(pos_row, train.x.row(unlabeled[j])),
                             static_cast<std::size_t>(j));
        }
      }
      const auto keep = std::min(cfg.per_positive, exact.size());
      std::partial_sort(exact.begin(), exact.begin() + keep, exact.end());
      for (std::size_t k = 0; k < keep; ++k) chosen[exact[k].second] = 1;
    }
  }

  for (std::size_t j = 0; j < unlabeled.size(); ++j) {
    if (chosen[j]) result.ids.push_back(unlabeled[j]);
  }
  return result;
}

}  // namespace pubot
