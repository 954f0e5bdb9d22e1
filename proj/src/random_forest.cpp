#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "pubot/classifiers.hpp"

namespace pubot {

namespace {

// Column-major bin codes plus the cut points between consecutive bins.
struct BinnedFeatures {
  std::size_t rows = 0;
  std::vector<std::uint8_t> codes;                // codes[f * rows + r]
  std::vector<std::vector<double>> cut_points;    // cut_points[f][k] separates bins k and k+1

  std::uint8_t code(std::size_t f, std::size_t r) const { return codes[f * rows + r]; }
  std::size_t bins(std::size_t f) const { return cut_points[f].size() + 1; }
};

BinnedFeatures bin_features(const Matrix& x, std::size_t max_bins) {
  BinnedFeatures out;
  out.rows = x.rows();
  out.codes.resize(x.rows() * x.cols());
  out.cut_points.resize(x.cols());

  std::vector<double> column(x.rows());
  for (std::size_t f = 0; f < x.cols(); ++f) {
    for (std::size_t r = 0; r < x.rows(); ++r) column[r] = x(r, f);
    std::vector<double> sorted = column;
    std::sort(sorted.begin(), sorted.end());

    std::vector<double> distinct;
    std::vector<std::size_t> counts;
    for (double v : sorted) {
      if (distinct.empty() || v != distinct.back()) {
        distinct.push_back(v);
        counts.push_back(1);
      } else {
        ++counts.back();
      }
    }

    auto& cuts = out.cut_points[f];
    if (distinct.size() <= max_bins) {
      for (std::size_t k = 0; k + 1 < distinct.size(); ++k) {
        cuts.push_back(distinct[k] + (distinct[k + 1] - distinct[k]) / 2.0);
      }
    } else {
      // Equal-frequency bins; a cut goes after the distinct value that crosses
      // the next quantile target.
      const double per_bin = static_cast<double>(x.rows()) / static_cast<double>(max_bins);
      double target = per_bin;
      std::size_t cumulative = 0;
      for (std::size_t k = 0; k + 1 < distinct.size(); ++k) {
        cumulative += counts[k];
        if (static_cast<double>(cumulative) >= target && cuts.size() + 1 < max_bins) {
          cuts.push_back(distinct[k] + (distinct[k + 1] - distinct[k]) / 2.0);
          while (target <= static_cast<double>(cumulative)) target += per_bin;
        }
      }
    }

    for (std::size_t r = 0; r < x.rows(); ++r) {
      // bin = number of cut points strictly below the value
      auto it = std::lower_bound(cuts.begin(), cuts.end(), column[r]);
      out.codes[f * out.rows + r] = static_cast<std::uint8_t>(it - cuts.begin());
    }
  }
  return out;
}

struct Sample {
  std::uint32_t row;
  std::uint32_t weight;
};

class TreeBuilder {
 public:
  TreeBuilder(const BinnedFeatures& bins, std::span<const std::uint8_t> y, const RFConfig& cfg,
              std::size_t dims, std::uint64_t seed)
      : bins_(bins), y_(y), cfg_(cfg), dims_(dims), mtry_(cfg.resolved_features_per_split(dims)),
        rng_(seed), total_(256), positive_(256), order_(dims) {}

  DecisionTree build() {
    std::vector<std::uint32_t> weight(bins_.rows, 0);
    if (cfg_.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, bins_.rows - 1);
      for (std::size_t i = 0; i < bins_.rows; ++i) ++weight[pick(rng_)];
    } else {
      std::fill(weight.begin(), weight.end(), 1u);
    }
    samples_.clear();
    for (std::size_t r = 0; r < bins_.rows; ++r) {
      if (weight[r] > 0) samples_.push_back({static_cast<std::uint32_t>(r), weight[r]});
    }
    tree_.nodes.clear();
    grow(0, samples_.size(), 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    double gain = 0.0;
    std::size_t feature = 0;
    std::size_t bin = 0;  // rows with code <= bin go left
    bool found = false;
  };

  std::int32_t grow(std::size_t begin, std::size_t end, std::size_t depth) {
    double n = 0.0;
    double pos = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      n += samples_[i].weight;
      pos += samples_[i].weight * double(y_[samples_[i].row]);
    }
    const auto id = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.push_back(TreeNode{});
    tree_.nodes[id].value = (pos + 1.0) / (n + 2.0);

    const double min_leaf = static_cast<double>(cfg_.min_samples_leaf);
    if (depth >= cfg_.max_depth || pos == 0.0 || pos == n || n < 2.0 * min_leaf) return id;

    Split best = find_split(begin, end, n, pos);
    if (!best.found) return id;

    auto mid = std::partition(samples_.begin() + begin, samples_.begin() + end,
                              [&](const Sample& s) { return bins_.code(best.feature, s.row) <= best.bin; });
    const auto split_at = static_cast<std::size_t>(mid - samples_.begin());

    tree_.nodes[id].feature = static_cast<std::int32_t>(best.feature);
    tree_.nodes[id].threshold = bins_.cut_points[best.feature][best.bin];
    const auto left = grow(begin, split_at, depth + 1);
    const auto right = grow(split_at, end, depth + 1);
    tree_.nodes[id].left = left;
    tree_.nodes[id].right = right;
    return id;
  }

  // Visits features in random order until `mtry_` features that are not
  // constant within the node have been evaluated.
  Split find_split(std::size_t begin, std::size_t end, double n, double pos) {
    std::iota(order_.begin(), order_.end(), 0);
    const double min_leaf = static_cast<double>(cfg_.min_samples_leaf);
    const double parent = (pos * pos + (n - pos) * (n - pos)) / n;

    Split best;
    std::size_t evaluated = 0;
    for (std::size_t k = 0; k < dims_ && evaluated < mtry_; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, dims_ - 1);
      std::swap(order_[k], order_[pick(rng_)]);
      const std::size_t f = order_[k];
      const std::size_t nb = bins_.bins(f);
      if (nb < 2) continue;

      std::fill_n(total_.begin(), nb, 0.0);
      std::fill_n(positive_.begin(), nb, 0.0);
      const std::uint8_t* codes = bins_.codes.data() + f * bins_.rows;
      for (std::size_t i = begin; i < end; ++i) {
        const auto& s = samples_[i];
        const auto b = codes[s.row];
        total_[b] += s.weight;
        positive_[b] += s.weight * double(y_[s.row]);
      }
      std::size_t occupied = 0;
      for (std::size_t b = 0; b < nb && occupied < 2; ++b) occupied += total_[b] > 0.0;
      if (occupied < 2) continue;
      ++evaluated;

      double left_n = 0.0;
      double left_pos = 0.0;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        left_n += total_[b];
        left_pos += positive_[b];
        if (total_[b] == 0.0) continue;  // same partition as the previous cut
        const double right_n = n - left_n;
        if (left_n < min_leaf) continue;
        if (right_n < min_leaf) break;
        const double right_pos = pos - left_pos;
        const double left_neg = left_n - left_pos;
        const double right_neg = right_n - right_pos;
        const double gain = (left_pos * left_pos + left_neg * left_neg) / left_n +
                            (right_pos * right_pos + right_neg * right_neg) / right_n - parent;
        if (gain <= 1e-12) continue;
        const bool better = !best.found || gain > best.gain ||
                            (gain == best.gain &&
                             (f < best.feature || (f == best.feature && b < best.bin)));
        if (better) best = Split{gain, f, b, true};
      }
    }
    return best;
  }

  const BinnedFeatures& bins_;
  std::span<const std::uint8_t> y_;
  const RFConfig& cfg_;
  std::size_t dims_;
  std::size_t mtry_;
  std::mt19937_64 rng_;
  std::vector<double> total_;
  std::vector<double> positive_;
  std::vector<std::size_t> order_;
  std::vector<Sample> samples_;
  DecisionTree tree_;
};

}  // namespace

void RFConfig::validate() const {
  if (n_trees < 1) throw ConfigError("n_trees must be >= 1");
  if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
  if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
  if (max_bins < 2 || max_bins > 256) throw ConfigError("max_bins must be in [2, 256]");
}

std::size_t RFConfig::resolved_features_per_split(std::size_t dims) const {
  std::size_t m = features_per_split;
  if (m == 0) m = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(dims))));
  return std::clamp<std::size_t>(m, 1, std::max<std::size_t>(dims, 1));
}

void to_json(nlohmann::json& j, const RFConfig& cfg) {
  j = nlohmann::json{{"n_trees", cfg.n_trees},
                     {"max_depth", cfg.max_depth},
                     {"min_samples_leaf", cfg.min_samples_leaf},
                     {"features_per_split", cfg.features_per_split},
                     {"bootstrap", cfg.bootstrap},
                     {"max_bins", cfg.max_bins},
                     {"seed", cfg.seed},
                     {"workers", cfg.workers}};
}

void from_json(const nlohmann::json& j, RFConfig& cfg) {
  RFConfig d;
  cfg.n_trees = j.value("n_trees", d.n_trees);
  cfg.max_depth = j.value("max_depth", d.max_depth);
  cfg.min_samples_leaf = j.value("min_samples_leaf", d.min_samples_leaf);
  if (j.contains("features_per_split") && j["features_per_split"].is_string()) {
    if (j["features_per_split"] != "sqrt") throw ConfigError("features_per_split: expected a count or \"sqrt\"");
    cfg.features_per_split = 0;
  } else {
    cfg.features_per_split = j.value("features_per_split", d.features_per_split);
  }
  cfg.bootstrap = j.value("bootstrap", d.bootstrap);
  cfg.max_bins = j.value("max_bins", d.max_bins);
  cfg.seed = j.value("seed", d.seed);
  cfg.workers = j.value("workers", d.workers);
}

double DecisionTree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& node = nodes[i];
    i = static_cast<std::size_t>(x[node.feature] <= node.threshold ? node.left : node.right);
  }
  return nodes[i].value;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  std::size_t deepest = 0;
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (nodes[i].feature >= 0) {
      stack.emplace_back(nodes[i].left, d + 1);
      stack.emplace_back(nodes[i].right, d + 1);
    }
  }
  return deepest;
}

RandomForest::RandomForest(std::size_t dims, std::vector<DecisionTree> trees)
    : dims_(dims), trees_(std::move(trees)) {
  if (trees_.empty()) throw Error("random forest needs at least one tree");
  for (const auto& t : trees_) {
    if (t.nodes.empty()) throw Error("random forest: empty tree");
    for (const auto& n : t.nodes) {
      if (n.feature >= 0 &&
          (static_cast<std::size_t>(n.feature) >= dims_ || n.left < 0 || n.right < 0 ||
           static_cast<std::size_t>(n.left) >= t.nodes.size() ||
           static_cast<std::size_t>(n.right) >= t.nodes.size())) {
        throw Error("random forest: malformed tree node");
      }
    }
  }
}

double RandomForest::predict_row(std::span<const double> x) const {
  double sum = 0.0;
  for (const auto& t : trees_) sum += t.predict(x);
  return sum / static_cast<double>(trees_.size());
}

nlohmann::json RandomForest::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) {
    std::vector<std::int32_t> feature, left, right;
    std::vector<double> threshold, value;
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
    }
    trees.push_back({{"feature", feature},
                     {"threshold", threshold},
                     {"left", left},
                     {"right", right},
                     {"value", value}});
  }
  return {{"kind", to_string(kind())}, {"dims", dims_}, {"trees", std::move(trees)}};
}

RandomForest RandomForest::from_json(const nlohmann::json& j) {
  std::vector<DecisionTree> trees;
  for (const auto& jt : j.at("trees")) {
    auto feature = jt.at("feature").get<std::vector<std::int32_t>>();
    auto threshold = jt.at("threshold").get<std::vector<double>>();
    auto left = jt.at("left").get<std::vector<std::int32_t>>();
    auto right = jt.at("right").get<std::vector<std::int32_t>>();
    auto value = jt.at("value").get<std::vector<double>>();
    const auto n = feature.size();
    if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n) {
      throw ParseError("random forest: tree arrays differ in length");
    }
    DecisionTree t;
    t.nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      t.nodes[i] = TreeNode{feature[i], threshold[i], left[i], right[i], value[i]};
    }
    trees.push_back(std::move(t));
  }
  return RandomForest(j.at("dims").get<std::size_t>(), std::move(trees));
}

RandomForest train_random_forest(const Matrix& x, std::span<const std::uint8_t> y,
                                 const RFConfig& cfg) {
  cfg.validate();
  if (x.rows() != y.size()) {
    throw Error("train_random_forest: " + std::to_string(x.rows()) + " rows but " +
                std::to_string(y.size()) + " labels");
  }
  const auto positives = std::count(y.begin(), y.end(), std::uint8_t{1});
  if (positives == 0 || static_cast<std::size_t>(positives) == y.size()) {
    throw Error("degenerate training set: both classes are required");
  }
  if (x.rows() > std::numeric_limits<std::uint32_t>::max()) throw Error("too many rows");

  const auto bins = bin_features(x, cfg.max_bins);
  std::vector<DecisionTree> trees(cfg.n_trees);
  parallel_for(cfg.n_trees, cfg.workers, [&](std::size_t t) {
    TreeBuilder builder(bins, y, cfg, x.cols(), derive_seed(cfg.seed, {t}));
    trees[t] = builder.build();
  });
  return RandomForest(x.cols(), std::move(trees));
}

}  // namespace pubot
