// Command-line front end: dataset preparation, benchmark cells and grids, and
// the web-session pipeline.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "pubot/benchmark.hpp"
#include "pubot/session_pipeline.hpp"
#include "pubot/sessionizer.hpp"

namespace fs = std::filesystem;
using namespace pubot;

namespace {

struct CommonOptions {
  std::string config;
  std::string data_dir;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "JSON benchmark config");
  cmd->add_option("--data-dir", o.data_dir, "directory holding KDDTrain+.txt and KDDTest+.txt");
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--workers", o.workers, "concurrent cells / threads");
}

BenchmarkConfig resolve_config(const CommonOptions& o) {
  BenchmarkConfig cfg = o.config.empty() ? BenchmarkConfig{} : load_benchmark_config(o.config);
  if (!o.data_dir.empty()) cfg.data_dir = o.data_dir;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (o.seed) cfg.master_seed = *o.seed;
  if (o.workers) cfg.workers = *o.workers;
  return cfg;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

BenchmarkContext prepare_logged(const BenchmarkConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  auto ctx = prepare_benchmark(cfg);
  std::cerr << "prepared " << ctx.data.train.rows() << "/" << ctx.data.val.rows() << "/"
            << ctx.data.test.rows() << " rows, " << ctx.data.train.features.dims()
            << " features; oracle AUC train " << ctx.oracle_train_auc << ", test "
            << ctx.oracle_test_auc << " (" << seconds_since(start) << " s)\n";
  return ctx;
}

int cmd_prepare(const CommonOptions& o) {
  auto cfg = resolve_config(o);
  const auto records = load_nslkdd(cfg.data_dir / cfg.train_file, cfg.data_dir / cfg.test_file);
  const auto labels = binarize_labels(records);
  auto data = prepare_dataset(records, cfg.split);
  fs::create_directories(cfg.out_dir);
  write_labeled_csv(cfg.out_dir / "train.csv", data.train);
  write_labeled_csv(cfg.out_dir / "val.csv", data.val);
  write_labeled_csv(cfg.out_dir / "test.csv", data.test);
  std::cout << "records    " << records.size() << "\n"
            << "legitimate " << labels.positives << "\n"
            << "intrusion  " << labels.negatives << "\n"
            << "attributes " << records.front().attributes.size() << "\n"
            << "features   " << data.encoding.dims() << "\n"
            << "split      " << data.train.rows() << " / " << data.val.rows() << " / "
            << data.test.rows() << "\n";
  return 0;
}

int cmd_run_cell(const CommonOptions& o, double topper, double mixing, const std::string& method,
                 std::size_t replicate, const std::string& save_model, const std::string& export_dir) {
  auto cfg = resolve_config(o);
  CellSpec cell{topper, mixing, parse_method(method), replicate};
  SimulationConfig{topper, mixing, 0}.validate();
  cfg.validate();

  auto ctx = prepare_logged(cfg);
  const auto start = std::chrono::steady_clock::now();
  auto report = run_cell(cfg, ctx, cell);
  std::cerr << "cell finished in " << seconds_since(start) << " s\n";

  fs::create_directories(cfg.out_dir);
  std::ostringstream name;
  name << "cell_" << report.method << "_t" << topper << "_m" << mixing << "_r" << replicate << ".tsv";
  std::ofstream out(cfg.out_dir / name.str());
  write_reports(out, {report});
  write_reports(std::cout, {report});

  if (!save_model.empty() || !export_dir.empty()) {
    // Refit deterministically to obtain the model and simulated data themselves.
    const SimulationConfig sim_cfg{topper, mixing,
                                   simulation_seed(cfg.master_seed, topper, mixing, replicate)};
    auto sim = simulate(ctx.data, ctx.train_scores, ctx.val_scores, sim_cfg);
    if (!export_dir.empty()) {
      fs::create_directories(export_dir);
      write_pu_csv(fs::path(export_dir) / "train.csv", sim.train);
      write_pu_csv(fs::path(export_dir) / "val.csv", sim.val);
      write_pu_csv(fs::path(export_dir) / "test.csv", sim.test);
    }
    if (!save_model.empty()) {
      PUFitConfig fit = cfg.fit;
      fit.forest.seed = fit.svm.seed = report.seed;
      ModelBundle bundle{fit_pu_model(cell.method, sim.train.data, sim.val.data, fit), {},
                         report.threshold, {}};
      save_bundle(save_model, bundle);
    }
  }
  return 0;
}

int cmd_run_grid(const CommonOptions& o, const std::vector<std::string>& methods,
                 std::optional<std::size_t> replicates) {
  auto cfg = resolve_config(o);
  if (!methods.empty()) {
    cfg.methods.clear();
    for (const auto& m : methods) cfg.methods.push_back(parse_method(m));
  }
  if (replicates) cfg.replicates = *replicates;
  cfg.validate();

  auto ctx = prepare_logged(cfg);
  const auto cells = enumerate_cells(cfg);
  std::cerr << "running " << cells.size() << " cells on " << cfg.workers << " worker(s)\n";
  const auto start = std::chrono::steady_clock::now();
  std::size_t done = 0;
  auto result = run_grid(cfg, ctx, [&](const EvaluationReport& r) {
    ++done;
    std::cerr << "[" << done << "/" << cells.size() << "] " << r.method << " t=" << r.topper
              << " m=" << r.mixing << " rep=" << r.replicate << " ";
    if (r.ok()) {
      std::cerr << "auc=" << r.auc << " pr@r99=" << r.precision_at_recall99 << '\n';
    } else {
      std::cerr << "FAILED: " << r.error << '\n';
    }
  });
  std::cerr << "grid finished in " << seconds_since(start) << " s\n";

  fs::create_directories(cfg.out_dir);
  {
    std::ofstream out(cfg.out_dir / "results.tsv");
    write_reports(out, result.reports);
  }
  const auto table = format_results_table(result.summaries);
  {
    std::ofstream out(cfg.out_dir / "table.txt");
    out << table;
  }
  {
    std::ofstream out(cfg.out_dir / "config.json");
    out << nlohmann::json(cfg).dump(2) << '\n';
  }
  std::cout << table;
  return 0;
}

int cmd_sessionize(const std::string& hits_path, const std::string& cidr_path,
                   const std::string& out_path, bool drop_bots, double timeout) {
  auto log = read_hit_log(hits_path);
  SessionizeOptions options;
  options.timeout_seconds = timeout;
  if (drop_bots) options.drop_hit = is_declared_bot;
  const auto n_hits = log.hits.size();
  auto sessions = sessionize(std::move(log.hits), options);
  const auto cloud = cidr_path.empty() ? std::vector<CidrBlock>{} : read_cidr_list(cidr_path);
  const auto tags = tag_pu_labels(sessions, purchaser_visitors(sessions), cloud);
  write_session_table(out_path, make_session_table(sessions, tags));

  std::size_t positives = 0, negatives = 0;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    positives += tags.s[i];
    negatives += tags.eval_negative[i];
  }
  std::cout << "hits      " << n_hits << " (" << log.skipped << " malformed lines skipped)\n"
            << "sessions  " << sessions.size() << "\n"
            << "positive  " << positives << "\n"
            << "negative  " << negatives << " (evaluation only)\n";
  if (tags.conflicts) {
    std::cerr << "warning: " << tags.conflicts
              << " purchaser sessions came from cloud ranges; kept as positive\n";
  }
  return 0;
}

int cmd_fit_sessions(const std::string& sessions_path, const std::string& method,
                     const std::string& model_path, std::uint64_t seed) {
  auto table = read_session_table(sessions_path);
  SessionFitOptions options;
  options.method = parse_method(method);
  options.split.seed = seed;
  options.fit.forest.seed = options.fit.svm.seed = seed;
  auto bundle = fit_session_model(table, options);
  save_bundle(model_path, bundle);
  std::cout << "saved " << to_string(bundle.model.method()) << " model to " << model_path;
  if (bundle.threshold) std::cout << " (threshold " << *bundle.threshold << ")";
  std::cout << '\n';
  return 0;
}

int cmd_score_sessions(const std::string& model_path, const std::string& sessions_path,
                       const std::string& out_path, std::optional<double> threshold) {
  auto bundle = load_bundle(model_path);
  auto table = read_session_table(sessions_path);
  auto scoring = score_sessions(bundle, table, threshold);
  write_session_scores(out_path, table, scoring);
  std::cout << format_session_summary(scoring);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Positive-unlabeled bot detection toolkit"};
  app.require_subcommand(1);

  CommonOptions prep_opts;
  auto* prep = app.add_subcommand("prepare-data", "load, split, encode and standardize NSL-KDD");
  add_common(prep, prep_opts);

  CommonOptions cell_opts;
  double topper = 0.9, mixing = 0.0;
  std::string method = "RAM", save_model, export_dir;
  std::size_t replicate = 0;
  auto* cell = app.add_subcommand("run-cell", "run one (topper, mixing, method) benchmark cell");
  add_common(cell, cell_opts);
  cell->add_option("--topper", topper, "topper quantile t in [0, 1)");
  cell->add_option("--mixing", mixing, "mixing percent m in [0, 100]");
  cell->add_option("--method", method, "EAM, MAM, RAM or BiasedSVM");
  cell->add_option("--replicate", replicate, "replicate index");
  cell->add_option("--save-model", save_model, "write the fitted model to this file");
  cell->add_option("--export-simulation", export_dir, "write the simulated splits here");

  CommonOptions grid_opts;
  std::vector<std::string> grid_methods;
  std::optional<std::size_t> replicates;
  auto* grid = app.add_subcommand("run-grid", "run the full topper x mixing x method grid");
  add_common(grid, grid_opts);
  grid->add_option("--method", grid_methods, "restrict to these methods");
  grid->add_option("--replicates", replicates, "replicates per cell");

  std::string hits_path, cidr_path, sessions_out;
  bool drop_bots = false;
  double timeout = kSessionTimeoutSeconds;
  auto* sess = app.add_subcommand("sessionize", "turn a hit log into a session feature file");
  sess->add_option("--hits", hits_path, "JSON-lines hit log")->required();
  sess->add_option("--cloud-ranges", cidr_path, "CIDR list of cloud ranges");
  sess->add_option("--out", sessions_out, "session file to write")->required();
  sess->add_flag("--drop-declared-bots", drop_bots, "drop hits from self-declared crawlers");
  sess->add_option("--timeout", timeout, "inactivity timeout in seconds");

  std::string fit_sessions_in, fit_method = "RAM", fit_model_out;
  std::uint64_t fit_seed = 0;
  auto* fit = app.add_subcommand("fit-sessions", "fit a PU model on a session file");
  fit->add_option("--sessions", fit_sessions_in, "session file")->required();
  fit->add_option("--method", fit_method, "EAM, RAM or BiasedSVM");
  fit->add_option("--out", fit_model_out, "model file to write")->required();
  fit->add_option("--seed", fit_seed, "seed");

  std::string score_model, score_sessions_in, score_out;
  std::optional<double> score_threshold;
  auto* score = app.add_subcommand("score-sessions", "score sessions and summarize by class");
  score->add_option("--model", score_model, "model file")->required();
  score->add_option("--sessions", score_sessions_in, "session file")->required();
  score->add_option("--out", score_out, "per-session output file")->required();
  score->add_option("--threshold", score_threshold, "override the stored threshold");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prep) return cmd_prepare(prep_opts);
    if (*cell) return cmd_run_cell(cell_opts, topper, mixing, method, replicate, save_model, export_dir);
    if (*grid) return cmd_run_grid(grid_opts, grid_methods, replicates);
    if (*sess) return cmd_sessionize(hits_path, cidr_path, sessions_out, drop_bots, timeout);
    if (*fit) return cmd_fit_sessions(fit_sessions_in, fit_method, fit_model_out, fit_seed);
    if (*score) return cmd_score_sessions(score_model, score_sessions_in, score_out, score_threshold);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
