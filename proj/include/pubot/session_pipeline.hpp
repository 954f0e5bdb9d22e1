#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pubot/dataset.hpp"
#include "pubot/pu_models.hpp"
#include "pubot/sessionizer.hpp"

namespace pubot {

struct SessionFitOptions {
  PUMethod method = PUMethod::ram;
  PUFitConfig fit;
  SplitSpec split;
  double target_recall = 0.99;
};

// Splits the sessions, standardizes with training statistics, fits the PU
// model on s labels only and sets the threshold from validation known positives.
ModelBundle fit_session_model(const SessionTable& table, const SessionFitOptions& options);

enum class SessionClass { positive, eval_negative, unlabeled };

std::string to_string(SessionClass c);

struct ClassBreakdown {
  std::size_t sessions = 0;
  std::size_t predicted_human = 0;
};

struct SessionScoring {
  std::vector<double> scores;
  std::vector<std::uint8_t> is_human;
  std::vector<SessionClass> classes;
  double threshold = 0.0;
  ClassBreakdown positive, eval_negative, unlabeled, total;
  bool no_humans_predicted = false;
};

// Threshold precedence: explicit override, then the bundle's stored value,
// then recall on the table's own known positives. Throws Error on a feature
// dimension mismatch.
SessionScoring score_sessions(const ModelBundle& bundle, const SessionTable& table,
                              std::optional<double> threshold_override = std::nullopt,
                              double target_recall = 0.99);

// Columns: session_id,visitor_id,class,score,is_human
void write_session_scores(const std::filesystem::path& path, const SessionTable& table,
                          const SessionScoring& scoring);

// Class x predicted-human breakdown.
std::string format_session_summary(const SessionScoring& scoring);

}  // namespace pubot
