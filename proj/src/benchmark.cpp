#include "pubot/benchmark.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>

namespace pubot {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError("bad number '" + s + "'");
  return v;
}

template <typename T>
T parse_unsigned(const std::string& s) {
  T v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError("bad integer '" + s + "'");
  return v;
}

// Tabs and newlines would break the row format.
std::string sanitize(std::string s) {
  std::replace_if(s.begin(), s.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
  return s;
}

std::uint64_t quantize(double v, double scale) {
  return static_cast<std::uint64_t>(std::llround(v * scale));
}

}  // namespace

PUFitConfig BenchmarkConfig::default_fit_config() {
  PUFitConfig fit;
  fit.mam_single_subgroup_fallback = true;
  return fit;
}

void BenchmarkConfig::validate() const {
  if (toppers.empty() || mixings.empty() || methods.empty()) {
    throw ConfigError("toppers, mixings and methods must be non-empty");
  }
  if (replicates == 0) throw ConfigError("replicates must be >= 1");
  for (double t : toppers) SimulationConfig{t, 0.0, 0}.validate();
  for (double m : mixings) SimulationConfig{0.5, m, 0}.validate();
  split.validate();
  oracle_forest.validate();
  fit.forest.validate();
  fit.svm.validate();
  if (!(target_recall > 0.0 && target_recall <= 1.0)) throw ConfigError("target_recall must be in (0, 1]");
}

void to_json(nlohmann::json& j, const BenchmarkConfig& cfg) {
  std::vector<std::string> methods;
  for (auto m : cfg.methods) methods.push_back(to_string(m));
  j = nlohmann::json{{"data_dir", cfg.data_dir.string()},
                     {"train_file", cfg.train_file},
                     {"test_file", cfg.test_file},
                     {"toppers", cfg.toppers},
                     {"mixings", cfg.mixings},
                     {"methods", methods},
                     {"replicates", cfg.replicates},
                     {"master_seed", cfg.master_seed},
                     {"split",
                      {{"train", cfg.split.train_frac},
                       {"val", cfg.split.val_frac},
                       {"test", cfg.split.test_frac},
                       {"seed", cfg.split.seed}}},
                     {"oracle_forest", cfg.oracle_forest},
                     {"fit", cfg.fit},
                     {"target_recall", cfg.target_recall},
                     {"workers", cfg.workers},
                     {"out_dir", cfg.out_dir.string()}};
}

void from_json(const nlohmann::json& j, BenchmarkConfig& cfg) {
  BenchmarkConfig d;
  cfg.data_dir = j.value("data_dir", d.data_dir.string());
  cfg.train_file = j.value("train_file", d.train_file);
  cfg.test_file = j.value("test_file", d.test_file);
  cfg.toppers = j.value("toppers", d.toppers);
  cfg.mixings = j.value("mixings", d.mixings);
  if (j.contains("methods")) {
    cfg.methods.clear();
    for (const auto& m : j["methods"]) cfg.methods.push_back(parse_method(m.get<std::string>()));
  } else {
    cfg.methods = d.methods;
  }
  cfg.replicates = j.value("replicates", d.replicates);
  cfg.master_seed = j.value("master_seed", d.master_seed);
  if (j.contains("split")) {
    const auto& s = j["split"];
    cfg.split.train_frac = s.value("train", d.split.train_frac);
    cfg.split.val_frac = s.value("val", d.split.val_frac);
    cfg.split.test_frac = s.value("test", d.split.test_frac);
    cfg.split.seed = s.value("seed", d.split.seed);
  }
  cfg.oracle_forest = j.value("oracle_forest", d.oracle_forest);
  // A partial "fit" block overrides the benchmark defaults key by key.
  nlohmann::json fit = d.fit;
  if (j.contains("fit")) fit.merge_patch(j["fit"]);
  cfg.fit = fit.get<PUFitConfig>();
  cfg.target_recall = j.value("target_recall", d.target_recall);
  cfg.workers = j.value("workers", d.workers);
  cfg.out_dir = j.value("out_dir", d.out_dir.string());
}

BenchmarkConfig load_benchmark_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    BenchmarkConfig cfg = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

BenchmarkContext prepare_benchmark(const BenchmarkConfig& cfg, std::span<const RawRecord> records) {
  cfg.validate();
  BenchmarkContext ctx;
  ctx.data = prepare_dataset(records, cfg.split);

  RFConfig forest = cfg.oracle_forest;
  forest.seed = derive_seed(cfg.master_seed, {hash_string("oracle")});
  ctx.oracle = train_oracle(ctx.data.train, forest);
  ctx.train_scores = score_positives(*ctx.oracle, ctx.data.train);
  ctx.val_scores = score_positives(*ctx.oracle, ctx.data.val);
  ctx.oracle_train_auc =
      roc_auc(ctx.oracle->predict_proba(ctx.data.train.features.values), ctx.data.train.y);
  ctx.oracle_test_auc =
      roc_auc(ctx.oracle->predict_proba(ctx.data.test.features.values), ctx.data.test.y);
  return ctx;
}

BenchmarkContext prepare_benchmark(const BenchmarkConfig& cfg) {
  auto records = load_nslkdd(cfg.data_dir / cfg.train_file, cfg.data_dir / cfg.test_file);
  return prepare_benchmark(cfg, records);
}

std::uint64_t simulation_seed(std::uint64_t master, double topper, double mixing,
                              std::size_t replicate) {
  return derive_seed(master, {hash_string("simulation"), quantize(topper, 1e6),
                              quantize(mixing, 1e3), replicate});
}

std::uint64_t cell_seed(std::uint64_t master, double topper, double mixing, PUMethod method,
                        std::size_t replicate) {
  return derive_seed(master, {hash_string("cell"), quantize(topper, 1e6), quantize(mixing, 1e3),
                              hash_string(to_string(method)), replicate});
}

bool EvaluationReport::operator==(const EvaluationReport& o) const {
  auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
  return method == o.method && same(topper, o.topper) && same(mixing, o.mixing) &&
         replicate == o.replicate && seed == o.seed && same(auc, o.auc) &&
         same(precision_at_recall99, o.precision_at_recall99) && same(threshold, o.threshold) &&
         counts.tp == o.counts.tp && counts.fp == o.counts.fp && counts.tn == o.counts.tn &&
         counts.fn == o.counts.fn && no_positive_predicted == o.no_positive_predicted &&
         error == o.error;
}

EvaluationReport evaluate_model(const PUModel& model, const PUDataset& data, double target_recall) {
  EvaluationReport r;
  r.method = to_string(model.method());

  const auto val_scores = model.score(data.val.data.x);
  std::vector<double> known;
  for (std::size_t i = 0; i < val_scores.size(); ++i) {
    if (data.val.data.s[i] == 1) known.push_back(val_scores[i]);
  }
  if (known.empty()) throw Error("no labeled positives in the validation set");
  r.threshold = threshold_at_recall(known, target_recall);

  const auto test_scores = model.score(data.test.data.x);
  r.auc = roc_auc(test_scores, data.test.y_eval);
  auto p = precision_at_threshold(test_scores, data.test.y_eval, r.threshold);
  r.precision_at_recall99 = p.precision;
  r.counts = p.counts;
  r.no_positive_predicted = p.no_positive_predicted;
  return r;
}

EvaluationReport run_cell(const BenchmarkConfig& cfg, const BenchmarkContext& ctx,
                          const CellSpec& cell) {
  auto stage = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      throw Error(std::string(name) + ": " + e.what());
    }
  };

  const auto seed = cell_seed(cfg.master_seed, cell.topper, cell.mixing, cell.method, cell.replicate);
  const SimulationConfig sim_cfg{cell.topper, cell.mixing,
                                 simulation_seed(cfg.master_seed, cell.topper, cell.mixing, cell.replicate)};
  auto sim = stage("simulate", [&] { return simulate(ctx.data, ctx.train_scores, ctx.val_scores, sim_cfg); });

  PUFitConfig fit = cfg.fit;
  fit.forest.seed = seed;
  fit.svm.seed = seed;
  auto model = stage("fit", [&] { return fit_pu_model(cell.method, sim.train.data, sim.val.data, fit); });
  auto report = stage("evaluate", [&] { return evaluate_model(model, sim, cfg.target_recall); });
  report.topper = cell.topper;
  report.mixing = cell.mixing;
  report.replicate = cell.replicate;
  report.seed = seed;
  return report;
}

std::vector<CellSpec> enumerate_cells(const BenchmarkConfig& cfg) {
  std::vector<CellSpec> cells;
  for (double t : cfg.toppers) {
    for (double m : cfg.mixings) {
      for (auto method : cfg.methods) {
        for (std::size_t rep = 0; rep < cfg.replicates; ++rep) cells.push_back({t, m, method, rep});
      }
    }
  }
  return cells;
}

std::vector<CellSummary> summarize(const std::vector<EvaluationReport>& reports) {
  // Keyed on (t, m, method); std::map keeps the output order independent of
  // the order reports arrive in.
  std::map<std::tuple<double, double, std::string>, std::vector<const EvaluationReport*>> groups;
  for (const auto& r : reports) groups[{r.topper, r.mixing, r.method}].push_back(&r);

  std::vector<CellSummary> out;
  for (auto& [key, list] : groups) {
    std::sort(list.begin(), list.end(),
              [](auto* a, auto* b) { return a->replicate < b->replicate; });
    CellSummary s;
    std::tie(s.topper, s.mixing, s.method) = key;
    std::vector<double> auc, prec;
    for (const auto* r : list) {
      if (!r->ok()) {
        ++s.failures;
        continue;
      }
      auc.push_back(r->auc);
      prec.push_back(r->precision_at_recall99);
    }
    s.runs = auc.size();
    auto stats = [](const std::vector<double>& v, double& mean, double& sd) {
      mean = sd = std::nan("");
      if (v.empty()) return;
      double sum = 0.0;
      for (double x : v) sum += x;
      mean = sum / static_cast<double>(v.size());
      if (v.size() < 2) {
        sd = 0.0;
        return;
      }
      double sq = 0.0;
      for (double x : v) sq += (x - mean) * (x - mean);
      sd = std::sqrt(sq / static_cast<double>(v.size() - 1));
    };
    stats(auc, s.auc_mean, s.auc_std);
    stats(prec, s.precision_mean, s.precision_std);
    out.push_back(s);
  }
  return out;
}

GridResult run_grid(const BenchmarkConfig& cfg, const BenchmarkContext& ctx,
                    const std::function<void(const EvaluationReport&)>& on_cell) {
  cfg.validate();
  const auto cells = enumerate_cells(cfg);
  BenchmarkConfig cell_cfg = cfg;
  if (cfg.workers > 1) cell_cfg.fit.forest.workers = 1;

  GridResult result;
  result.reports.resize(cells.size());
  std::mutex callback_mutex;
  parallel_for(cells.size(), cfg.workers, [&](std::size_t i) {
    const auto& cell = cells[i];
    EvaluationReport report;
    try {
      report = run_cell(cell_cfg, ctx, cell);
    } catch (const std::exception& e) {
      report.method = to_string(cell.method);
      report.topper = cell.topper;
      report.mixing = cell.mixing;
      report.replicate = cell.replicate;
      report.seed = cell_seed(cfg.master_seed, cell.topper, cell.mixing, cell.method, cell.replicate);
      report.auc = report.precision_at_recall99 = report.threshold = std::nan("");
      report.error = e.what();
    }
    result.reports[i] = report;
    if (on_cell) {
      std::lock_guard lock(callback_mutex);
      on_cell(report);
    }
  });
  result.summaries = summarize(result.reports);
  return result;
}

namespace {
const char* const kReportColumns[] = {"method", "topper", "mixing", "replicate", "seed",
                                      "auc", "pr_at_recall99", "threshold", "tp", "fp",
                                      "tn", "fn", "no_positive_predicted", "error"};
}

void write_reports(std::ostream& out, const std::vector<EvaluationReport>& reports) {
  for (std::size_t i = 0; i < std::size(kReportColumns); ++i) {
    out << (i ? "\t" : "") << kReportColumns[i];
  }
  out << '\n';
  for (const auto& r : reports) {
    out << sanitize(r.method) << '\t' << format_double(r.topper) << '\t' << format_double(r.mixing)
        << '\t' << r.replicate << '\t' << r.seed << '\t' << format_double(r.auc) << '\t'
        << format_double(r.precision_at_recall99) << '\t' << format_double(r.threshold) << '\t'
        << r.counts.tp << '\t' << r.counts.fp << '\t' << r.counts.tn << '\t' << r.counts.fn << '\t'
        << (r.no_positive_predicted ? 1 : 0) << '\t' << sanitize(r.error) << '\n';
  }
}

std::vector<EvaluationReport> read_reports(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty report file");
  std::vector<EvaluationReport> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      auto tab = line.find('\t', start);
      cells.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cells.size() != std::size(kReportColumns)) {
      throw ParseError("report line " + std::to_string(line_no) + ": expected " +
                       std::to_string(std::size(kReportColumns)) + " fields");
    }
    EvaluationReport r;
    r.method = cells[0];
    r.topper = parse_double(cells[1]);
    r.mixing = parse_double(cells[2]);
    r.replicate = parse_unsigned<std::size_t>(cells[3]);
    r.seed = parse_unsigned<std::uint64_t>(cells[4]);
    r.auc = parse_double(cells[5]);
    r.precision_at_recall99 = parse_double(cells[6]);
    r.threshold = parse_double(cells[7]);
    r.counts.tp = parse_unsigned<std::size_t>(cells[8]);
    r.counts.fp = parse_unsigned<std::size_t>(cells[9]);
    r.counts.tn = parse_unsigned<std::size_t>(cells[10]);
    r.counts.fn = parse_unsigned<std::size_t>(cells[11]);
    r.no_positive_predicted = cells[12] == "1";
    r.error = cells[13];
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_results_table(const std::vector<CellSummary>& summaries) {
  std::vector<double> toppers, mixings;
  std::vector<std::string> methods;
  for (const auto& s : summaries) {
    if (std::find(toppers.begin(), toppers.end(), s.topper) == toppers.end()) toppers.push_back(s.topper);
    if (std::find(mixings.begin(), mixings.end(), s.mixing) == mixings.end()) mixings.push_back(s.mixing);
    if (std::find(methods.begin(), methods.end(), s.method) == methods.end()) methods.push_back(s.method);
  }
  std::sort(toppers.begin(), toppers.end());
  std::sort(mixings.begin(), mixings.end());

  auto find = [&](double t, double m, const std::string& method) -> const CellSummary* {
    for (const auto& s : summaries) {
      if (s.topper == t && s.mixing == m && s.method == method) return &s;
    }
    return nullptr;
  };
  // 2 = best, 1 = second best in the column, by mean.
  auto rank_mark = [&](double t, double m, const std::string& method, bool auc) -> std::string {
    std::vector<std::pair<double, std::string>> values;
    for (const auto& other : methods) {
      if (const auto* s = find(t, m, other); s && s->runs > 0) {
        values.emplace_back(auc ? s->auc_mean : s->precision_mean, other);
      }
    }
    std::stable_sort(values.begin(), values.end(), [](auto& a, auto& b) { return a.first > b.first; });
    if (!values.empty() && values[0].second == method) return "**";
    if (values.size() > 1 && values[1].second == method) return "*";
    return "";
  };

  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  for (double t : toppers) {
    out << "topper t=" << format_double(t) << '\n';
    out << std::left << std::setw(12) << "method";
    for (double m : mixings) {
      out << std::setw(20) << ("m=" + format_double(m) + " AUC") << std::setw(20)
          << ("m=" + format_double(m) + " Pr@R99");
    }
    out << '\n';
    for (const auto& method : methods) {
      out << std::setw(12) << method;
      for (double m : mixings) {
        const auto* s = find(t, m, method);
        for (bool auc : {true, false}) {
          std::ostringstream cell;
          cell << std::fixed << std::setprecision(3);
          if (!s || s->runs == 0) {
            cell << (s && s->failures ? "failed" : "-");
          } else {
            cell << (auc ? s->auc_mean : s->precision_mean);
            if (s->runs > 1) cell << "+-" << (auc ? s->auc_std : s->precision_std);
            cell << rank_mark(t, m, method, auc);
          }
          out << std::setw(20) << cell.str();
        }
      }
      out << '\n';
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace pubot
