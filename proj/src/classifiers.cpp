#include "pubot/classifiers.hpp"

namespace pubot {

std::string to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::random_forest: return "random_forest";
    case ClassifierKind::weighted_linear_svm: return "weighted_linear_svm";
    case ClassifierKind::constant: return "constant";
  }
  return "unknown";
}

std::vector<double> ProbClassifier::predict_proba(const Matrix& x) const {
  if (x.rows() > 0 && x.cols() != feature_dims()) {
    throw Error("dimension mismatch: model expects " + std::to_string(feature_dims()) +
                " features, input has " + std::to_string(x.cols()));
  }
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict_row(x.row(r));
  return out;
}

ConstantClassifier::ConstantClassifier(std::size_t dims, double value) : dims_(dims), value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) throw Error("constant classifier value must be in [0, 1]");
}

nlohmann::json ConstantClassifier::to_json() const {
  return {{"kind", to_string(kind())}, {"dims", dims_}, {"value", value_}};
}

std::unique_ptr<ProbClassifier> classifier_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "random_forest") return std::make_unique<RandomForest>(RandomForest::from_json(j));
  if (kind == "weighted_linear_svm") return std::make_unique<LinearSvm>(LinearSvm::from_json(j));
  if (kind == "constant") {
    return std::make_unique<ConstantClassifier>(j.at("dims").get<std::size_t>(),
                                                j.at("value").get<double>());
  }
  throw ParseError("unknown classifier kind '" + kind + "'");
}

}  // namespace pubot
