#include "pubot/session_pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "pubot/metrics.hpp"

namespace pubot {

ModelBundle fit_session_model(const SessionTable& table, const SessionFitOptions& options) {
  if (table.rows() == 0) throw Error("no sessions to train on");
  auto idx = split_indices(table.rows(), options.split);

  auto make = [&](const std::vector<std::size_t>& rows) {
    PUSet set;
    set.x = table.features.select_rows(rows);
    for (auto r : rows) set.s.push_back(table.s[r]);
    set.b.assign(rows.size(), -1);
    return set;
  };
  auto train = make(idx.train);
  auto val = make(idx.val);

  auto stats = fit_standardization(train.x);
  apply_standardization(train.x, stats);
  apply_standardization(val.x, stats);

  ModelBundle bundle{fit_pu_model(options.method, train, val, options.fit), stats, std::nullopt,
                     session_feature_names()};
  const auto val_scores = bundle.model.score(val.x);
  std::vector<double> known;
  for (std::size_t i = 0; i < val_scores.size(); ++i) {
    if (val.s[i]) known.push_back(val_scores[i]);
  }
  if (!known.empty()) bundle.threshold = threshold_at_recall(known, options.target_recall);
  return bundle;
}

std::string to_string(SessionClass c) {
  switch (c) {
    case SessionClass::positive: return "positive";
    case SessionClass::eval_negative: return "negative";
    case SessionClass::unlabeled: return "unlabeled";
  }
  return "unknown";
}

SessionScoring score_sessions(const ModelBundle& bundle, const SessionTable& table,
                              std::optional<double> threshold_override, double target_recall) {
  SessionScoring out;
  if (table.rows() == 0) {
    out.no_humans_predicted = true;
    out.threshold = threshold_override.value_or(bundle.threshold.value_or(0.0));
    return out;
  }
  if (table.features.cols() != bundle.model.feature_dims()) {
    throw Error("dimension mismatch: model expects " + std::to_string(bundle.model.feature_dims()) +
                " features, session file has " + std::to_string(table.features.cols()));
  }
  Matrix x = table.features;
  if (!bundle.standardization.empty()) apply_standardization(x, bundle.standardization);
  out.scores = bundle.model.score(x);

  if (threshold_override) {
    out.threshold = *threshold_override;
  } else if (bundle.threshold) {
    out.threshold = *bundle.threshold;
  } else {
    std::vector<double> known;
    for (std::size_t i = 0; i < table.rows(); ++i) {
      if (table.s[i]) known.push_back(out.scores[i]);
    }
    if (known.empty()) throw Error("no threshold given and no known positives to derive one");
    out.threshold = threshold_at_recall(known, target_recall);
  }

  for (std::size_t i = 0; i < table.rows(); ++i) {
    const bool human = out.scores[i] >= out.threshold;
    const auto cls = table.s[i] ? SessionClass::positive
                   : table.eval_negative[i] ? SessionClass::eval_negative
                                            : SessionClass::unlabeled;
    out.is_human.push_back(human);
    out.classes.push_back(cls);
    auto& bucket = cls == SessionClass::positive        ? out.positive
                   : cls == SessionClass::eval_negative ? out.eval_negative
                                                        : out.unlabeled;
    ++bucket.sessions;
    ++out.total.sessions;
    bucket.predicted_human += human;
    out.total.predicted_human += human;
  }
  out.no_humans_predicted = out.total.predicted_human == 0;
  return out;
}

void write_session_scores(const std::filesystem::path& path, const SessionTable& table,
                          const SessionScoring& scoring) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "session_id,visitor_id,class,score,is_human\n";
  for (std::size_t i = 0; i < scoring.scores.size(); ++i) {
    out << table.session_ids[i] << ',' << table.visitor_ids[i] << ',' << to_string(scoring.classes[i])
        << ',' << scoring.scores[i] << ',' << int(scoring.is_human[i]) << '\n';
  }
}

std::string format_session_summary(const SessionScoring& scoring) {
  std::ostringstream out;
  auto row = [&](const std::string& name, const ClassBreakdown& b) {
    out << std::left << std::setw(12) << name << std::right << std::setw(12) << b.sessions
        << std::setw(18) << b.predicted_human << std::setw(20);
    if (b.sessions == 0) {
      out << "-";
    } else {
      std::ostringstream pct;
      pct << std::fixed << std::setprecision(1)
          << 100.0 * static_cast<double>(b.predicted_human) / static_cast<double>(b.sessions) << "%";
      out << pct.str();
    }
    out << '\n';
  };
  out << std::left << std::setw(12) << "class" << std::right << std::setw(12) << "sessions"
      << std::setw(18) << "predicted human" << std::setw(20) << "% predicted human" << '\n';
  row("Positive", scoring.positive);
  row("Negative", scoring.eval_negative);
  row("Unlabeled", scoring.unlabeled);
  row("Total", scoring.total);
  out << "threshold " << scoring.threshold << '\n';
  if (scoring.no_humans_predicted) out << "warning: no humans predicted\n";
  return out.str();
}

}  // namespace pubot
