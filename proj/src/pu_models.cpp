#include "pubot/pu_models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "pubot/metrics.hpp"

namespace pubot {

std::size_t PUSet::labeled() const {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), std::uint8_t{1}));
}

void PUSet::validate() const {
  if (x.rows() != s.size() || b.size() != s.size()) {
    throw Error("PU set: feature rows, s flags and b flags differ in length");
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] > 1) throw Error("PU set: s must be 0 or 1");
    if (b[i] < -1 || b[i] > 1) throw Error("PU set: b must be -1, 0 or 1");
    if (b[i] != -1 && s[i] != 1) {
      throw Error("PU set: row " + std::to_string(i) + " has a subgroup flag but is unlabeled");
    }
  }
}

LabelFrequency::LabelFrequency(double c) : c_(c) {
  if (!(c > 0.0 && c <= 1.0)) throw Error("label frequency must be in (0, 1], got " + std::to_string(c));
}

LabelFrequency LabelFrequency::clamped(double c) {
  if (std::isnan(c)) throw Error("label frequency is NaN");
  return LabelFrequency(std::clamp(c, kMin, 1.0));
}

std::string to_string(PUMethod method) {
  switch (method) {
    case PUMethod::eam: return "EAM";
    case PUMethod::mam: return "MAM";
    case PUMethod::ram: return "RAM";
    case PUMethod::biased_svm: return "BiasedSVM";
  }
  return "unknown";
}

PUMethod parse_method(std::string_view name) {
  std::string lower;
  for (char ch : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  if (lower == "eam") return PUMethod::eam;
  if (lower == "mam") return PUMethod::mam;
  if (lower == "ram") return PUMethod::ram;
  if (lower == "biasedsvm" || lower == "biased_svm" || lower == "biased-svm") {
    return PUMethod::biased_svm;
  }
  throw ConfigError("unknown method '" + std::string(name) + "' (expected EAM, MAM, RAM or BiasedSVM)");
}

double eam_score(double numerator, double c) { return std::clamp(numerator / c, 0.0, 1.0); }

double mam_score(double numerator, double c, double propensity) {
  return std::clamp(numerator / (c + propensity * (1.0 - c)), 0.0, 1.0);
}

double ram_score(double numerator, double denominator, double floor) {
  return std::clamp(numerator / std::max(denominator, floor), 0.0, 1.0);
}

PUModel::PUModel(PUMethod method, std::shared_ptr<const ProbClassifier> numerator,
                 std::optional<LabelFrequency> c, std::shared_ptr<const ProbClassifier> propensity,
                 double floor)
    : method_(method), numerator_(std::move(numerator)), c_(c), propensity_(std::move(propensity)),
      floor_(floor) {
  if (!numerator_) throw Error("PU model needs a numerator classifier");
  if (propensity_ && propensity_->feature_dims() != numerator_->feature_dims()) {
    throw Error("PU model: numerator and propensity models disagree on feature dims");
  }
  if (!(floor_ > 0.0)) throw Error("denominator floor must be > 0");
}

PUModel PUModel::eam(std::shared_ptr<const ProbClassifier> numerator, LabelFrequency c) {
  return PUModel(PUMethod::eam, std::move(numerator), c, nullptr, kDefaultDenominatorFloor);
}

PUModel PUModel::mam(std::shared_ptr<const ProbClassifier> numerator, LabelFrequency c,
                     std::shared_ptr<const ProbClassifier> propensity) {
  if (!propensity) throw Error("MAM needs a propensity model");
  return PUModel(PUMethod::mam, std::move(numerator), c, std::move(propensity),
                 kDefaultDenominatorFloor);
}

PUModel PUModel::ram(std::shared_ptr<const ProbClassifier> numerator,
                     std::shared_ptr<const ProbClassifier> propensity, double denominator_floor) {
  if (!propensity) throw Error("RAM needs a denominator model");
  return PUModel(PUMethod::ram, std::move(numerator), std::nullopt, std::move(propensity),
                 denominator_floor);
}

PUModel PUModel::biased_svm(std::shared_ptr<const ProbClassifier> svm) {
  return PUModel(PUMethod::biased_svm, std::move(svm), std::nullopt, nullptr,
                 kDefaultDenominatorFloor);
}

double PUModel::score_row(std::span<const double> x) const {
  const double num = numerator_->predict_row(x);
  switch (method_) {
    case PUMethod::eam: return eam_score(num, c_->value());
    case PUMethod::mam: return mam_score(num, c_->value(), propensity_->predict_row(x));
    case PUMethod::ram: return ram_score(num, propensity_->predict_row(x), floor_);
    case PUMethod::biased_svm: return std::clamp(num, 0.0, 1.0);
  }
  return num;
}

std::vector<double> PUModel::score(const Matrix& x) const {
  if (x.rows() > 0 && x.cols() != feature_dims()) {
    throw Error("dimension mismatch: model expects " + std::to_string(feature_dims()) +
                " features, input has " + std::to_string(x.cols()));
  }
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = score_row(x.row(r));
  return out;
}

nlohmann::json PUModel::to_json() const {
  nlohmann::json j{{"method", to_string(method_)},
                   {"denominator_floor", floor_},
                   {"numerator", numerator_->to_json()}};
  if (c_) j["c"] = c_->value();
  if (propensity_) j["propensity"] = propensity_->to_json();
  return j;
}

PUModel PUModel::from_json(const nlohmann::json& j) {
  const auto method = parse_method(j.at("method").get<std::string>());
  std::shared_ptr<const ProbClassifier> numerator = classifier_from_json(j.at("numerator"));
  std::shared_ptr<const ProbClassifier> propensity;
  if (j.contains("propensity")) propensity = classifier_from_json(j.at("propensity"));
  switch (method) {
    case PUMethod::eam: return eam(numerator, LabelFrequency(j.at("c").get<double>()));
    case PUMethod::mam:
      return mam(numerator, LabelFrequency(j.at("c").get<double>()), propensity);
    case PUMethod::ram: return ram(numerator, propensity, j.at("denominator_floor").get<double>());
    case PUMethod::biased_svm: return biased_svm(numerator);
  }
  throw ParseError("bad PU model");
}

void to_json(nlohmann::json& j, const PUFitConfig& cfg) {
  j = nlohmann::json{{"forest", cfg.forest},
                     {"svm", cfg.svm},
                     {"mining",
                      {{"candidates", cfg.mining.candidates},
                       {"per_positive", cfg.mining.per_positive}}},
                     {"svm_positive_weights", cfg.svm_positive_weights},
                     {"denominator_floor", cfg.denominator_floor},
                     {"mam_single_subgroup_fallback", cfg.mam_single_subgroup_fallback}};
}

void from_json(const nlohmann::json& j, PUFitConfig& cfg) {
  PUFitConfig d;
  cfg.forest = j.value("forest", d.forest);
  cfg.svm = j.value("svm", d.svm);
  if (j.contains("mining")) {
    cfg.mining.candidates = j["mining"].value("candidates", d.mining.candidates);
    cfg.mining.per_positive = j["mining"].value("per_positive", d.mining.per_positive);
  }
  cfg.svm_positive_weights = j.value("svm_positive_weights", d.svm_positive_weights);
  cfg.denominator_floor = j.value("denominator_floor", d.denominator_floor);
  cfg.mam_single_subgroup_fallback =
      j.value("mam_single_subgroup_fallback", d.mam_single_subgroup_fallback);
}

std::shared_ptr<const ProbClassifier> fit_numerator(const PUSet& train, const RFConfig& cfg) {
  train.validate();
  const auto labeled = train.labeled();
  if (labeled == 0 || labeled == train.rows()) {
    throw Error("numerator needs both labeled (s=1) and unlabeled (s=0) rows");
  }
  return std::make_shared<RandomForest>(train_random_forest(train.x, train.s, cfg));
}

LabelFrequency estimate_c(const ProbClassifier& numerator, const PUSet& val, CSubgroup subgroup) {
  val.validate();
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < val.rows(); ++r) {
    if (val.s[r] != 1) continue;
    if (subgroup == CSubgroup::b0_only && val.b[r] != 0) continue;
    sum += numerator.predict_row(val.x.row(r));
    ++n;
  }
  if (n == 0) {
    throw Error(subgroup == CSubgroup::b0_only
                    ? "cannot estimate c: no labeled b=0 rows in the validation set"
                    : "cannot estimate c: no labeled rows in the validation set");
  }
  return LabelFrequency::clamped(sum / static_cast<double>(n));
}

PUModel fit_eam(const PUSet& train, const PUSet& val, const PUFitConfig& cfg) {
  auto numerator = fit_numerator(train, cfg.forest);
  auto c = estimate_c(*numerator, val, CSubgroup::all_labeled);
  return PUModel::eam(std::move(numerator), c);
}

PUModel fit_mam(const PUSet& train, const PUSet& val, const PUFitConfig& cfg) {
  train.validate();
  std::vector<std::size_t> labeled_rows;
  std::vector<std::uint8_t> subgroup;
  std::size_t b1 = 0;
  for (std::size_t r = 0; r < train.rows(); ++r) {
    if (train.s[r] != 1) continue;
    if (train.b[r] < 0) throw Error("MAM requires both subgroups: labeled row without a b flag");
    labeled_rows.push_back(r);
    subgroup.push_back(static_cast<std::uint8_t>(train.b[r]));
    b1 += train.b[r] == 1;
  }
  const bool single = b1 == 0 || b1 == labeled_rows.size();
  if (single && !cfg.mam_single_subgroup_fallback) {
    throw Error("MAM requires both subgroups (b=1 and b=0) among labeled rows");
  }

  auto numerator = fit_numerator(train, cfg.forest);
  std::shared_ptr<const ProbClassifier> propensity;
  if (single) {
    propensity = std::make_shared<ConstantClassifier>(train.x.cols(), b1 == 0 ? 0.0 : 1.0);
  } else {
    auto x = train.x.select_rows(labeled_rows);
    RFConfig forest = cfg.forest;
    forest.seed = derive_seed(cfg.forest.seed, {hash_string("mam-propensity")});
    propensity = std::make_shared<RandomForest>(train_random_forest(x, subgroup, forest));
  }

  const bool val_has_b0 = std::any_of(val.b.begin(), val.b.end(), [](auto v) { return v == 0; });
  const auto subgroup_for_c =
      (!val_has_b0 && cfg.mam_single_subgroup_fallback) ? CSubgroup::all_labeled : CSubgroup::b0_only;
  auto c = estimate_c(*numerator, val, subgroup_for_c);
  return PUModel::mam(std::move(numerator), c, std::move(propensity));
}

PUModel fit_ram(const PUSet& train, const PUFitConfig& cfg) {
  auto numerator = fit_numerator(train, cfg.forest);
  auto mined = mine_pseudo_unlabeled_positives(train, cfg.mining);
  if (mined.ids.empty()) throw Error("RAM needs pseudo unlabeled positives; mining found none");

  std::vector<std::size_t> rows;
  std::vector<std::uint8_t> labels;
  for (std::size_t r = 0; r < train.rows(); ++r) {
    if (train.s[r] == 1) {
      rows.push_back(r);
      labels.push_back(1);
    }
  }
  for (auto r : mined.ids) {
    rows.push_back(r);
    labels.push_back(0);
  }
  RFConfig forest = cfg.forest;
  forest.seed = derive_seed(cfg.forest.seed, {hash_string("ram-denominator")});
  auto denominator = std::make_shared<RandomForest>(
      train_random_forest(train.x.select_rows(rows), labels, forest));
  return PUModel::ram(std::move(numerator), std::move(denominator), cfg.denominator_floor);
}

PUModel fit_biased_svm(const PUSet& train, const PUSet& val, const PUFitConfig& cfg) {
  train.validate();
  val.validate();
  if (cfg.svm_positive_weights.empty()) throw ConfigError("biased SVM weight grid is empty");

  std::shared_ptr<const LinearSvm> best;
  double best_auc = -1.0;
  for (double weight : cfg.svm_positive_weights) {
    SVMConfig svm = cfg.svm;
    svm.positive_class_weight = weight;
    svm.negative_class_weight = 1.0;
    auto model = std::make_shared<LinearSvm>(train_weighted_linear_svm(train.x, train.s, svm));
    if (cfg.svm_positive_weights.size() == 1) return PUModel::biased_svm(std::move(model));
    const double auc = roc_auc(model->predict_proba(val.x), val.s);
    if (auc > best_auc) {
      best_auc = auc;
      best = std::move(model);
    }
  }
  return PUModel::biased_svm(std::move(best));
}

PUModel fit_pu_model(PUMethod method, const PUSet& train, const PUSet& val,
                     const PUFitConfig& cfg) {
  switch (method) {
    case PUMethod::eam: return fit_eam(train, val, cfg);
    case PUMethod::mam: return fit_mam(train, val, cfg);
    case PUMethod::ram: return fit_ram(train, cfg);
    case PUMethod::biased_svm: return fit_biased_svm(train, val, cfg);
  }
  throw ConfigError("unknown method");
}

namespace {
constexpr const char* kBundleFormat = "pubot-model";
constexpr int kBundleVersion = 1;
}  // namespace

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle) {
  nlohmann::json stats = nlohmann::json::array();
  for (const auto& s : bundle.standardization) {
    stats.push_back({{"mean", s.mean}, {"stddev", s.stddev}, {"constant", s.constant}});
  }
  nlohmann::json j{{"format", kBundleFormat},
                   {"version", kBundleVersion},
                   {"model", bundle.model.to_json()},
                   {"standardization", std::move(stats)},
                   {"feature_names", bundle.feature_names}};
  if (bundle.threshold) j["threshold"] = *bundle.threshold;
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump() << '\n';
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (j.value("format", "") != kBundleFormat) throw ParseError(path.string() + ": not a model file");
  if (j.value("version", 0) != kBundleVersion) {
    throw ParseError(path.string() + ": unsupported model version");
  }
  try {
    ModelBundle bundle{PUModel::from_json(j.at("model")), {}, std::nullopt,
                       j.value("feature_names", std::vector<std::string>{})};
    for (const auto& s : j.at("standardization")) {
      bundle.standardization.push_back(
          {s.at("mean").get<double>(), s.at("stddev").get<double>(), s.at("constant").get<bool>()});
    }
    if (j.contains("threshold")) bundle.threshold = j["threshold"].get<double>();
    return bundle;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace pubot
