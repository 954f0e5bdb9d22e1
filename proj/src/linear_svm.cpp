#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pubot/classifiers.hpp"

namespace pubot {

void SVMConfig::validate() const {
  if (!(positive_class_weight > 0.0) || !(negative_class_weight > 0.0)) {
    throw ConfigError("svm class weights must be > 0");
  }
  if (!(regularization > 0.0)) throw ConfigError("svm regularization must be > 0");
  if (!(learning_rate > 0.0)) throw ConfigError("svm learning_rate must be > 0");
  if (decay < 0.0) throw ConfigError("svm decay must be >= 0");
  if (epochs < 1) throw ConfigError("svm epochs must be >= 1");
  if (calibration_fraction < 0.0 || calibration_fraction >= 1.0) {
    throw ConfigError("svm calibration_fraction must be in [0, 1)");
  }
}

void to_json(nlohmann::json& j, const SVMConfig& cfg) {
  j = nlohmann::json{{"positive_class_weight", cfg.positive_class_weight},
                     {"negative_class_weight", cfg.negative_class_weight},
                     {"regularization", cfg.regularization},
                     {"epochs", cfg.epochs},
                     {"learning_rate", cfg.learning_rate},
                     {"decay", cfg.decay},
                     {"calibration_fraction", cfg.calibration_fraction},
                     {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, SVMConfig& cfg) {
  SVMConfig d;
  cfg.positive_class_weight = j.value("positive_class_weight", d.positive_class_weight);
  cfg.negative_class_weight = j.value("negative_class_weight", d.negative_class_weight);
  cfg.regularization = j.value("regularization", d.regularization);
  cfg.epochs = j.value("epochs", d.epochs);
  cfg.learning_rate = j.value("learning_rate", d.learning_rate);
  cfg.decay = j.value("decay", d.decay);
  cfg.calibration_fraction = j.value("calibration_fraction", d.calibration_fraction);
  cfg.seed = j.value("seed", d.seed);
}

LinearSvm::LinearSvm(std::vector<double> weights, double bias, double sigmoid_a, double sigmoid_b)
    : weights_(std::move(weights)), bias_(bias), a_(sigmoid_a), b_(sigmoid_b) {}

double LinearSvm::margin(std::span<const double> x) const {
  double m = bias_;
  for (std::size_t i = 0; i < weights_.size(); ++i) m += weights_[i] * x[i];
  return m;
}

double LinearSvm::predict_row(std::span<const double> x) const {
  const double z = a_ * margin(x) + b_;
  // numerically stable logistic of -z
  return z >= 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
}

nlohmann::json LinearSvm::to_json() const {
  return {{"kind", to_string(kind())},
          {"weights", weights_},
          {"bias", bias_},
          {"sigmoid_a", a_},
          {"sigmoid_b", b_}};
}

LinearSvm LinearSvm::from_json(const nlohmann::json& j) {
  return LinearSvm(j.at("weights").get<std::vector<double>>(), j.at("bias").get<double>(),
                   j.at("sigmoid_a").get<double>(), j.at("sigmoid_b").get<double>());
}

std::pair<double, double> fit_platt_sigmoid(std::span<const double> f,
                                            std::span<const std::uint8_t> labels) {
  if (f.size() != labels.size() || f.empty()) throw Error("platt: bad input sizes");
  const double prior1 = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double prior0 = static_cast<double>(labels.size()) - prior1;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);

  auto objective = [&](double a, double b) {
    double v = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double t = labels[i] ? hi : lo;
      const double z = f[i] * a + b;
      v += z >= 0.0 ? t * z + std::log1p(std::exp(-z)) : (t - 1.0) * z + std::log1p(std::exp(z));
    }
    return v;
  };

  double a = 0.0;
  double b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  double fval = objective(a, b);
  constexpr double sigma = 1e-12;
  for (int iter = 0; iter < 100; ++iter) {
    double h11 = sigma, h22 = sigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double t = labels[i] ? hi : lo;
      const double z = f[i] * a + b;
      double p, q;
      if (z >= 0.0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += f[i] * f[i] * d2;
      h22 += d2;
      h21 += f[i] * d2;
      const double d1 = t - p;
      g1 += f[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;

    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= 1e-10) {
      const double na = a + step * da;
      const double nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < 1e-10) break;
  }
  return {a, b};
}

LinearSvm train_weighted_linear_svm(const Matrix& x, std::span<const std::uint8_t> y,
                                    const SVMConfig& cfg) {
  cfg.validate();
  if (x.rows() != y.size()) throw Error("train_weighted_linear_svm: row/label count mismatch");
  const auto positives = std::count(y.begin(), y.end(), std::uint8_t{1});
  if (positives == 0 || static_cast<std::size_t>(positives) == y.size()) {
    throw Error("degenerate training set: both classes are required");
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  // Hold out a calibration share; fall back to in-sample calibration when
  // either part would miss a class.
  auto n_cal = static_cast<std::size_t>(std::floor(cfg.calibration_fraction * x.rows()));
  auto has_both = [&](auto first, auto last) {
    bool pos = false, neg = false;
    for (auto it = first; it != last; ++it) (y[*it] ? pos : neg) = true;
    return pos && neg;
  };
  std::vector<std::size_t> fit_rows(order.begin() + n_cal, order.end());
  std::vector<std::size_t> cal_rows(order.begin(), order.begin() + n_cal);
  if (n_cal == 0 || !has_both(fit_rows.begin(), fit_rows.end()) ||
      !has_both(cal_rows.begin(), cal_rows.end())) {
    fit_rows = order;
    cal_rows = order;
  }

  const std::size_t d = x.cols();
  std::vector<double> w(d, 0.0), w_avg(d, 0.0);
  double b = 0.0, b_avg = 0.0;
  std::size_t averaged = 0;
  std::size_t step = 0;
  const double lambda = cfg.regularization;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(fit_rows.begin(), fit_rows.end(), rng);
    for (auto r : fit_rows) {
      const double rate = cfg.learning_rate / (1.0 + cfg.decay * static_cast<double>(step++));
      const double target = y[r] ? 1.0 : -1.0;
      const double cost = y[r] ? cfg.positive_class_weight : cfg.negative_class_weight;
      auto row = x.row(r);
      double m = b;
      for (std::size_t i = 0; i < d; ++i) m += w[i] * row[i];
      const double shrink = 1.0 - rate * lambda;
      for (auto& wi : w) wi *= shrink;
      if (target * m < 1.0) {
        const double g = rate * cost * target;
        for (std::size_t i = 0; i < d; ++i) w[i] += g * row[i];
        b += g;
      }
      // Running average of the iterates after the first epoch.
      if (epoch > 0 || cfg.epochs == 1) {
        ++averaged;
        const double k = 1.0 / static_cast<double>(averaged);
        for (std::size_t i = 0; i < d; ++i) w_avg[i] += (w[i] - w_avg[i]) * k;
        b_avg += (b - b_avg) * k;
      }
    }

    double loss = 0.0;
    for (auto wi : w) loss += 0.5 * lambda * wi * wi;
    if (!std::isfinite(loss) || !std::isfinite(b)) {
      throw Error("diverged; reduce learning rate");
    }
  }

  LinearSvm raw(w_avg, b_avg, -1.0, 0.0);
  std::vector<double> decision;
  std::vector<std::uint8_t> labels;
  decision.reserve(cal_rows.size());
  for (auto r : cal_rows) {
    decision.push_back(raw.margin(x.row(r)));
    labels.push_back(y[r]);
    if (!std::isfinite(decision.back())) throw Error("diverged; reduce learning rate");
  }
  auto [a, sb] = fit_platt_sigmoid(decision, labels);
  return LinearSvm(std::move(w_avg), b_avg, a, sb);
}

}  // namespace pubot
