#include "pubot/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace pubot {

void SimulationConfig::validate() const {
  if (!(topper_t >= 0.0 && topper_t < 1.0)) throw ConfigError("topper t must be in [0, 1)");
  if (!(mixing_m >= 0.0 && mixing_m <= 100.0)) throw ConfigError("mixing m must be in [0, 100]");
}

std::shared_ptr<const RandomForest> train_oracle(const LabeledDataset& train, const RFConfig& cfg) {
  return std::make_shared<RandomForest>(train_random_forest(train.features.values, train.y, cfg));
}

PositiveScores score_positives(const ProbClassifier& oracle, const LabeledDataset& data) {
  PositiveScores out;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    if (data.y[r] != 1) continue;
    out.rows.push_back(r);
    out.scores.push_back(oracle.predict_row(data.features.values.row(r)));
  }
  return out;
}

double empirical_quantile(std::span<const double> values, double q) {
  if (values.empty()) throw Error("quantile of an empty set");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

std::vector<std::size_t> apply_topper(std::span<const std::size_t> positive_ids,
                                      std::span<const double> scores, double t) {
  if (!(t >= 0.0 && t < 1.0)) throw ConfigError("topper t must be in [0, 1)");
  if (positive_ids.size() != scores.size()) {
    throw Error("apply_topper: ids and scores differ in length");
  }
  std::vector<std::size_t> selected;
  if (scores.empty()) return selected;
  const double cut = empirical_quantile(scores, t);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > cut) selected.push_back(positive_ids[i]);
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

LabeledSubset apply_mixing(std::span<const std::size_t> selected,
                           std::span<const std::size_t> all_positive_ids, double m,
                           std::uint64_t seed) {
  if (!(m >= 0.0 && m <= 100.0)) throw ConfigError("mixing m must be in [0, 100]");
  auto n_swap = static_cast<std::size_t>(
      std::ceil(m / 100.0 * static_cast<double>(selected.size()) - 1e-9));
  n_swap = std::min(n_swap, selected.size());

  std::vector<std::size_t> survivors(selected.begin(), selected.end());
  std::vector<std::size_t> drawn;
  if (n_swap > 0) {
    if (all_positive_ids.empty()) throw Error("apply_mixing: no positives to draw from");
    std::mt19937_64 rng(seed);
    std::shuffle(survivors.begin(), survivors.end(), rng);
    survivors.erase(survivors.begin(), survivors.begin() + n_swap);
    std::uniform_int_distribution<std::size_t> pick(0, all_positive_ids.size() - 1);
    for (std::size_t k = 0; k < n_swap; ++k) drawn.push_back(all_positive_ids[pick(rng)]);
  }

  std::sort(survivors.begin(), survivors.end());
  survivors.erase(std::unique(survivors.begin(), survivors.end()), survivors.end());
  std::sort(drawn.begin(), drawn.end());
  drawn.erase(std::unique(drawn.begin(), drawn.end()), drawn.end());

  LabeledSubset out;
  std::size_t i = 0, j = 0;
  while (i < survivors.size() || j < drawn.size()) {
    if (j == drawn.size() || (i < survivors.size() && survivors[i] <= drawn[j])) {
      if (j < drawn.size() && survivors[i] == drawn[j]) ++j;
      out.ids.push_back(survivors[i++]);
      out.b.push_back(1);
    } else {
      out.ids.push_back(drawn[j++]);
      out.b.push_back(0);
    }
  }
  return out;
}

namespace {

PUSplit make_split(const LabeledDataset& data, const LabeledSubset* labeled, const char* name) {
  PUSplit out;
  out.data.x = data.features.values;
  out.data.s.assign(data.rows(), 0);
  out.data.b.assign(data.rows(), -1);
  out.y_eval = data.y;
  out.ids = data.ids;
  if (!labeled) return out;
  if (labeled->ids.size() != labeled->b.size()) throw Error("labeled subset: ids and b differ in length");
  for (std::size_t k = 0; k < labeled->ids.size(); ++k) {
    const auto r = labeled->ids[k];
    if (r >= data.rows() || data.y[r] != 1) {
      throw Error(std::string("labeled id ") + std::to_string(r) + " is not a positive of the " +
                  name + " split");
    }
    out.data.s[r] = 1;
    out.data.b[r] = labeled->b[k];
  }
  return out;
}

}  // namespace

PUDataset assemble_pu_dataset(const LabeledDataset& train, const LabeledDataset& val,
                              const LabeledDataset& test, const LabeledSubset& train_labeled,
                              const LabeledSubset& val_labeled) {
  if (train_labeled.ids.empty()) throw Error("no labeled positives to learn from");
  return PUDataset{make_split(train, &train_labeled, "train"),
                   make_split(val, &val_labeled, "validation"), make_split(test, nullptr, "test")};
}

PUDataset simulate(const PreparedData& data, const PositiveScores& train_scores,
                   const PositiveScores& val_scores, const SimulationConfig& cfg) {
  cfg.validate();
  auto label = [&](const PositiveScores& ps, std::uint64_t salt) {
    auto selected = apply_topper(ps.rows, ps.scores, cfg.topper_t);
    return apply_mixing(selected, ps.rows, cfg.mixing_m, derive_seed(cfg.seed, {salt}));
  };
  auto train_labeled = label(train_scores, hash_string("train"));
  auto val_labeled = label(val_scores, hash_string("validation"));
  return assemble_pu_dataset(data.train, data.val, data.test, train_labeled, val_labeled);
}

void write_pu_csv(const std::filesystem::path& path, const PUSplit& split) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "id";
  for (std::size_t c = 0; c < split.data.x.cols(); ++c) out << ",f" << c;
  out << ",s,b,y_eval\n";
  for (std::size_t r = 0; r < split.data.rows(); ++r) {
    out << split.ids[r];
    for (double v : split.data.x.row(r)) out << ',' << v;
    out << ',' << int(split.data.s[r]) << ',';
    if (split.data.b[r] >= 0) out << int(split.data.b[r]);
    out << ',' << int(split.y_eval[r]) << '\n';
  }
}

}  // namespace pubot
