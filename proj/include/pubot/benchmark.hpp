#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "pubot/classifiers.hpp"
#include "pubot/dataset.hpp"
#include "pubot/metrics.hpp"
#include "pubot/pu_models.hpp"
#include "pubot/simulation.hpp"

namespace pubot {

struct BenchmarkConfig {
  std::filesystem::path data_dir = "data";
  std::string train_file = "KDDTrain+.txt";
  std::string test_file = "KDDTest+.txt";
  std::vector<double> toppers{0.90, 0.925};
  std::vector<double> mixings{0.0, 30.0, 70.0, 100.0};
  std::vector<PUMethod> methods{PUMethod::biased_svm, PUMethod::eam, PUMethod::mam, PUMethod::ram};
  std::size_t replicates = 5;
  std::uint64_t master_seed = 0;
  SplitSpec split;
  RFConfig oracle_forest;
  PUFitConfig fit = default_fit_config();
  double target_recall = kDefaultTargetRecall;
  std::size_t workers = 1;  // concurrent cells
  std::filesystem::path out_dir = "results";

  static PUFitConfig default_fit_config();
  void validate() const;
};

void to_json(nlohmann::json& j, const BenchmarkConfig& cfg);
void from_json(const nlohmann::json& j, BenchmarkConfig& cfg);
BenchmarkConfig load_benchmark_config(const std::filesystem::path& path);

// Prepared splits plus the supervised oracle, shared read-only by all cells.
struct BenchmarkContext {
  PreparedData data;
  std::shared_ptr<const RandomForest> oracle;
  PositiveScores train_scores;
  PositiveScores val_scores;
  double oracle_train_auc = 0.0;
  double oracle_test_auc = 0.0;
};

BenchmarkContext prepare_benchmark(const BenchmarkConfig& cfg, std::span<const RawRecord> records);
BenchmarkContext prepare_benchmark(const BenchmarkConfig& cfg);

struct CellSpec {
  double topper = 0.9;
  double mixing = 0.0;
  PUMethod method = PUMethod::ram;
  std::size_t replicate = 0;
};

// Seed for the simulated labels; shared by all methods of one (t, m, replicate).
std::uint64_t simulation_seed(std::uint64_t master, double topper, double mixing,
                              std::size_t replicate);
// Seed for model fitting; also depends on the method.
std::uint64_t cell_seed(std::uint64_t master, double topper, double mixing, PUMethod method,
                        std::size_t replicate);

struct EvaluationReport {
  std::string method;
  double topper = 0.0;
  double mixing = 0.0;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  double auc = 0.0;
  double precision_at_recall99 = 0.0;
  double threshold = 0.0;
  ConfusionCounts counts;
  bool no_positive_predicted = false;
  std::string error;  // non-empty when the cell failed

  bool ok() const { return error.empty(); }
  bool operator==(const EvaluationReport& o) const;
};

// AUC on test ground truth, threshold from validation known positives,
// precision on test at that threshold.
EvaluationReport evaluate_model(const PUModel& model, const PUDataset& data,
                                double target_recall = kDefaultTargetRecall);

// simulate -> fit -> evaluate for one cell. Stage failures are rethrown as
// Error("<stage>: <reason>").
EvaluationReport run_cell(const BenchmarkConfig& cfg, const BenchmarkContext& ctx,
                          const CellSpec& cell);

struct CellSummary {
  double topper = 0.0;
  double mixing = 0.0;
  std::string method;
  std::size_t runs = 0;
  std::size_t failures = 0;
  double auc_mean = 0.0;
  double auc_std = 0.0;
  double precision_mean = 0.0;
  double precision_std = 0.0;
};

struct GridResult {
  std::vector<EvaluationReport> reports;  // in cell enumeration order
  std::vector<CellSummary> summaries;     // one per (t, m, method)
};

std::vector<CellSpec> enumerate_cells(const BenchmarkConfig& cfg);

// Mean and sample stddev across replicates, ignoring failed runs.
std::vector<CellSummary> summarize(const std::vector<EvaluationReport>& reports);

// Runs every cell on a pool of cfg.workers threads. A failing cell is recorded
// in its report and the grid continues.
GridResult run_grid(const BenchmarkConfig& cfg, const BenchmarkContext& ctx,
                    const std::function<void(const EvaluationReport&)>& on_cell = {});

// Tab-separated rows with a header line; doubles in shortest round-trip form.
void write_reports(std::ostream& out, const std::vector<EvaluationReport>& reports);
std::vector<EvaluationReport> read_reports(std::istream& in);

// Methods as rows and mixing values as column pairs (AUC, Pr@Recall99), one
// block per topper. '**' marks the best and '*' the second best per column.
std::string format_results_table(const std::vector<CellSummary>& summaries);

}  // namespace pubot
